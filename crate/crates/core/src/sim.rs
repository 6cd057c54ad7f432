//! Table-driven evaluation for deterministic scheduler testing: every
//! configuration id carries precomputed loss, disparity, and cost for both
//! the plain and the mitigated variant.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimEntry {
    pub id: String,
    pub loss0: f64,
    pub disparity0: f64,
    pub cost0: f64,
    pub loss1: f64,
    pub disparity1: f64,
    pub cost1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimTable {
    pub entries: Vec<SimEntry>,
    /// Scripted suggestion order over ids; seeded-random when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<String>>,
}

impl SimTable {
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::SimTable("table has no entries".into()));
        }
        let mut seen = HashMap::new();
        for e in &self.entries {
            if seen.insert(e.id.clone(), ()).is_some() {
                return Err(Error::SimTable(format!("duplicate id '{}'", e.id)));
            }
            if e.cost0 <= 0.0 || e.cost1 <= 0.0 {
                return Err(Error::SimTable(format!("entry '{}' has cost <= 0", e.id)));
            }
            for v in [e.loss0, e.loss1, e.disparity0, e.disparity1] {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::SimTable(format!(
                        "entry '{}' has a negative or non-finite metric",
                        e.id
                    )));
                }
            }
        }
        if let Some(order) = &self.order {
            for id in order {
                if !seen.contains_key(id) {
                    return Err(Error::SimTable(format!("order references unknown id '{id}'")));
                }
            }
            if order.is_empty() {
                return Err(Error::SimTable("scripted order is empty".into()));
            }
        }
        Ok(())
    }

    pub fn entry(&self, id: &str) -> Option<&SimEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// (loss, disparity, cost) for the requested mode.
    pub fn lookup(&self, id: &str, mitigated: bool) -> Result<(f64, f64, f64)> {
        let e = self
            .entry(id)
            .ok_or_else(|| Error::SimTable(format!("unknown id '{id}'")))?;
        Ok(if mitigated {
            (e.loss1, e.disparity1, e.cost1)
        } else {
            (e.loss0, e.disparity0, e.cost0)
        })
    }

    pub fn ids(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.id.clone()).collect()
    }

    pub fn load(path: &Path) -> Result<SimTable> {
        let text = std::fs::read_to_string(path)?;
        let table: SimTable = serde_json::from_str(&text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Scenario where mitigation never helps: every mitigated variant stays
    /// unfair and costs roughly ten times its plain variant, while plain
    /// search alone reaches fair models. Used to measure wasted mitigation.
    pub fn scenario_s1(seed: u64, delta: f64) -> SimTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = (0..40)
            .map(|i| {
                let loss0 = rng.gen_range(0.10..0.40);
                let fair0 = rng.gen_bool(0.4);
                let disparity0 = if fair0 {
                    rng.gen_range(0.0..delta * 0.8)
                } else {
                    rng.gen_range(delta * 1.5..0.5)
                };
                let cost0 = rng.gen_range(0.5..2.0);
                SimEntry {
                    id: format!("c{i}"),
                    loss0,
                    disparity0,
                    cost0,
                    loss1: loss0 + rng.gen_range(0.05..0.15),
                    disparity1: delta + rng.gen_range(0.02..0.2),
                    cost1: cost0 * rng.gen_range(8.0..12.0),
                }
            })
            .collect();
        SimTable {
            entries,
            order: None,
        }
    }

    /// Scenario where fairness is reachable only through mitigation: no
    /// plain variant is fair, most mitigated variants are.
    pub fn scenario_s2(seed: u64, delta: f64) -> SimTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = (0..40)
            .map(|i| {
                let loss0 = rng.gen_range(0.10..0.40);
                let cost0 = rng.gen_range(0.5..2.0);
                let fair1 = rng.gen_bool(0.7);
                SimEntry {
                    id: format!("c{i}"),
                    loss0,
                    disparity0: delta + rng.gen_range(0.05..0.4),
                    cost0,
                    loss1: loss0 + rng.gen_range(0.01..0.08),
                    disparity1: if fair1 {
                        rng.gen_range(0.0..delta * 0.9)
                    } else {
                        delta + rng.gen_range(0.02..0.2)
                    },
                    cost1: cost0 * rng.gen_range(5.0..12.0),
                }
            })
            .collect();
        SimTable {
            entries,
            order: None,
        }
    }

    /// Random table for property tests: arbitrary fair/unfair placement in
    /// both modes.
    pub fn random_table(seed: u64, n: usize, delta: f64) -> SimTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = (0..n)
            .map(|i| {
                let cost0 = rng.gen_range(0.2..3.0);
                SimEntry {
                    id: format!("c{i}"),
                    loss0: rng.gen_range(0.05..0.6),
                    disparity0: rng.gen_range(0.0..0.5),
                    cost0,
                    loss1: rng.gen_range(0.05..0.7),
                    disparity1: rng.gen_range(0.0..0.5),
                    cost1: cost0 * rng.gen_range(1.5..15.0),
                }
            })
            .collect();
        let _ = delta;
        SimTable {
            entries,
            order: None,
        }
    }
}
