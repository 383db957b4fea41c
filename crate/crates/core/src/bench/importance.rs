//! Ranked gain importance of a boosted model.

use crate::error::{Error, Result};
use crate::model::Model;

/// Top `top_n` features by normalized gain, descending, ties broken by name.
/// Features that never split are left out, so a splitless model ranks
/// nothing.
pub fn export_importance(model: &Model, feature_names: &[String], top_n: usize) -> Result<Vec<(String, f64)>> {
    let Model::Boost(m) = model else {
        return Err(Error::InvalidParam(format!(
            "feature importance needs a boost model, got {}",
            model.kind()
        )));
    };
    if feature_names.len() != m.n_features() {
        return Err(Error::DimensionMismatch {
            expected: m.n_features(),
            found: feature_names.len(),
        });
    }
    let mut ranked: Vec<(String, f64)> = feature_names
        .iter()
        .cloned()
        .zip(m.feature_importance())
        .filter(|(_, s)| *s > 0.0)
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(top_n);
    Ok(ranked)
}

pub fn importance_tsv(ranked: &[(String, f64)]) -> String {
    let mut s = String::from("rank\tfeature\tscore\n");
    for (i, (name, score)) in ranked.iter().enumerate() {
        s.push_str(&format!("{}\t{name}\t{score}\n", i + 1));
    }
    s
}
