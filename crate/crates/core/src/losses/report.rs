use serde::{Deserialize, Serialize};

/// One weighted loss term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTerm {
    pub name: String,
    pub weight: f64,
    pub value: f64,
}

/// Per-term values of one loss evaluation; `total = sum weight * value`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub terms: Vec<LossTerm>,
    pub total: f64,
    pub valid_pixel_count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl LossReport {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }

    /// Sum of weighted term values, recomputed from the terms.
    pub fn weighted_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.weight * t.value).sum()
    }

    /// Element-wise mean of several reports with identical term layout.
    pub fn average(reports: &[LossReport]) -> LossReport {
        let Some(first) = reports.first() else {
            return LossReport::default();
        };
        let n = reports.len() as f64;
        let terms = first
            .terms
            .iter()
            .enumerate()
            .map(|(i, t)| LossTerm {
                name: t.name.clone(),
                weight: t.weight,
                value: reports.iter().map(|r| r.terms[i].value).sum::<f64>() / n,
            })
            .collect();
        LossReport {
            terms,
            total: reports.iter().map(|r| r.total).sum::<f64>() / n,
            valid_pixel_count: reports.iter().map(|r| r.valid_pixel_count).sum(),
            warnings: reports.iter().flat_map(|r| r.warnings.iter().cloned()).collect(),
        }
    }
}
