//! Request and response bodies, and the `field<uri>=value<uri>` pair syntax
//! used on the command line.

use serde::{Deserialize, Serialize};
use valrec_core::model::{validate_instance, Context, FieldSlot, FieldValuePair, RawInstance, RawPair, TermRef};
use valrec_core::recommend::{RecommendOptions, Recommendation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct WireField {
    pub field_label: String,
    #[serde(default)]
    pub field_type: Option<String>,
}

impl WireField {
    pub fn to_slot(&self) -> valrec_core::Result<FieldSlot> {
        let term = self.field_type.as_deref().filter(|t| !t.trim().is_empty()).map(TermRef::new).transpose()?;
        FieldSlot::new(self.field_label.clone(), term)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RecommendRequest {
    pub target_field: WireField,
    #[serde(default)]
    pub context: Vec<RawPair>,
    #[serde(default)]
    pub options: Option<RecommendOptions>,
}

/// A request reduced to engine inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub context: Context,
    pub target: FieldSlot,
    pub options: Option<RecommendOptions>,
}

/// Parses and validates a `/recommend` body. Context pairs with an empty
/// value are ignored, as they are in instance files.
pub fn parse_recommend_request(body: &[u8]) -> Result<Query, String> {
    let req: RecommendRequest = serde_json::from_slice(body).map_err(|e| e.to_string())?;
    let target = req.target_field.to_slot().map_err(|e| format!("targetField: {e}"))?;
    // Reuse instance validation for the context pairs.
    let raw = RawInstance { template_id: "context".into(), fields: req.context };
    let pairs = validate_instance(raw).map_err(|e| format!("context: {e}"))?.pairs().to_vec();
    let context = Context::new(pairs).map_err(|e| format!("context: {e}"))?;
    if let Some(opts) = &req.options {
        if opts.score_cutoff.is_some_and(|c| !c.is_finite()) {
            return Err("options.scoreCutoff must be finite".into());
        }
    }
    Ok(Query { context, target, options: req.options })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WireRecommendation {
    pub value_label: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value_type: Option<String>,
    pub score: f64,
    pub rank: usize,
}

impl From<&Recommendation> for WireRecommendation {
    fn from(r: &Recommendation) -> Self {
        WireRecommendation {
            value_label: r.value.label().to_string(),
            value_type: r.value.term().map(|t| t.as_str().to_string()),
            score: r.score,
            rank: r.rank,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommendResponse {
    pub recommendations: Vec<WireRecommendation>,
}

/// Splits `label<uri>` into its parts; the term is optional.
fn label_and_term(s: &str) -> Result<(&str, Option<&str>), String> {
    let s = s.trim();
    match s.strip_suffix('>') {
        Some(head) => {
            let open = head.rfind('<').ok_or_else(|| format!("unbalanced '>' in {s:?}"))?;
            Ok((&head[..open], Some(&head[open + 1..])))
        }
        None => Ok((s, None)),
    }
}

/// `disease=meningitis`, or with terms
/// `tissue<ncit:C12801>=liver<obo:UBERON_0002107>`. The first `=` outside
/// angle brackets separates field from value.
pub fn parse_pair_arg(arg: &str) -> Result<FieldValuePair, String> {
    let mut depth = 0i32;
    let mut split = None;
    for (i, ch) in arg.char_indices() {
        match ch {
            '<' => depth += 1,
            '>' => depth -= 1,
            '=' if depth == 0 => {
                split = Some(i);
                break;
            }
            _ => {}
        }
    }
    let at = split.ok_or_else(|| format!("expected field=value, got {arg:?}"))?;
    let (field, field_term) = label_and_term(&arg[..at])?;
    let (value, value_term) = label_and_term(&arg[at + 1..])?;
    let term = |t: Option<&str>| t.map(TermRef::new).transpose().map_err(|e| e.to_string());
    let field = FieldSlot::new(field, term(field_term)?).map_err(|e| format!("field in {arg:?}: {e}"))?;
    let value =
        valrec_core::model::ValueAtom::new(value, term(value_term)?).map_err(|e| format!("value in {arg:?}: {e}"))?;
    Ok(FieldValuePair::new(field, value))
}

/// Target field argument: `tissue` or `tissue<ncit:C12801>`.
pub fn parse_field_arg(arg: &str) -> Result<FieldSlot, String> {
    let (label, term) = label_and_term(arg)?;
    let term = term.map(TermRef::new).transpose().map_err(|e| e.to_string())?;
    FieldSlot::new(label, term).map_err(|e| e.to_string())
}
