use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Renders the low `width` bits of a readout key, readout position 0 leftmost.
pub fn render_bits(key: u64, width: usize) -> String {
    (0..width).map(|i| if (key >> i) & 1 == 1 { '1' } else { '0' }).collect()
}

/// Result of sampling or enumerating a circuit over a readout register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    /// Labels of the readout qubits, leftmost character first.
    pub readout: Vec<String>,
    pub seed: u64,
    pub shots: u64,
    pub histogram: BTreeMap<String, u64>,
    pub exact_distribution: Option<BTreeMap<String, f64>>,
}

impl RunOutcome {
    pub fn count(&self, bits: &str) -> u64 {
        self.histogram.get(bits).copied().unwrap_or(0)
    }

    pub fn probability(&self, bits: &str) -> Option<f64> {
        self.exact_distribution.as_ref().map(|d| d.get(bits).copied().unwrap_or(0.0))
    }

    /// `bitstring,count` rows; an exact-only outcome writes `bitstring,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.shots == 0 {
            if let Some(dist) = &self.exact_distribution {
                out.push_str("bitstring,probability\n");
                for (k, p) in dist {
                    out.push_str(&format!("{k},{p:.12}\n"));
                }
                return out;
            }
        }
        out.push_str("bitstring,count\n");
        for (k, n) in &self.histogram {
            out.push_str(&format!("{k},{n}\n"));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("outcome serialization cannot fail")
    }

    /// Largest probability gap between two exact distributions.
    pub fn max_distribution_gap(&self, other: &RunOutcome) -> Option<f64> {
        let (a, b) = (self.exact_distribution.as_ref()?, other.exact_distribution.as_ref()?);
        let gap = a
            .keys()
            .chain(b.keys())
            .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
            .fold(0.0, f64::max);
        Some(gap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_puts_first_readout_leftmost() {
        assert_eq!(render_bits(0b001, 3), "100");
        assert_eq!(render_bits(0b110, 3), "011");
        assert_eq!(render_bits(0, 0), "");
    }

    #[test]
    fn csv_layout() {
        let o = RunOutcome {
            readout: vec!["v1".into()],
            seed: 3,
            shots: 4,
            histogram: [("0".to_string(), 1), ("1".to_string(), 3)].into_iter().collect(),
            exact_distribution: None,
        };
        assert_eq!(o.to_csv(), "bitstring,count\n0,1\n1,3\n");
        assert_eq!(o.to_json()["seed"], 3);
    }
}
