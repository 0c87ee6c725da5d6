//! Serialization: CSV for curves, JSON envelopes for structured results.
//!
//! Floats are written with Rust's shortest-roundtrip formatting, so output
//! is byte-stable across runs and parses back exactly.

use serde::{Deserialize, Serialize};

use crate::dynamics::EntropyGrowth;
use crate::error::{Error, Result};
use crate::moments::DeltaSweepRow;
use crate::partition::{PartitionResult, PartitionTree};
use crate::spectra::{Source, Spectrum};
use crate::thermo::{DosReconstruction, ThermoCurve};

pub const SPECTRUM_CSV_SCHEMA: &str = "spectrum-csv/1";
pub const SPECTRUM_JSON_SCHEMA: &str = "spectrum/1";
pub const PARTITION_JSON_SCHEMA: &str = "partition/1";
pub const PARTITION_TREE_JSON_SCHEMA: &str = "partition-tree/1";

/// JSON envelope for a spectrum.
#[derive(Serialize, Deserialize)]
pub struct SpectrumEnvelope {
    pub schema: String,
    pub energies: Vec<f64>,
    pub n_qubits: Option<u32>,
    pub source: String,
    pub seed: Option<u64>,
}

pub fn spectrum_to_json(s: &Spectrum) -> String {
    let env = SpectrumEnvelope {
        schema: SPECTRUM_JSON_SCHEMA.to_string(),
        energies: s.energies().to_vec(),
        n_qubits: s.n_qubits(),
        source: s.source().to_string(),
        seed: s.seed(),
    };
    serde_json::to_string_pretty(&env).expect("spectrum serializes")
}

pub fn spectrum_from_json(text: &str) -> Result<Spectrum> {
    let env: SpectrumEnvelope =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let source: Source = env.source.parse()?;
    Spectrum::new(env.energies, source, env.n_qubits, env.seed)
}

/// CSV: comment header with provenance, then one energy per line.
pub fn spectrum_to_csv(s: &Spectrum) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {SPECTRUM_CSV_SCHEMA}\n"));
    out.push_str(&format!("# source: {}\n", s.source()));
    if let Some(seed) = s.seed() {
        out.push_str(&format!("# seed: {seed}\n"));
    }
    if let Some(n) = s.n_qubits() {
        out.push_str(&format!("# n_qubits: {n}\n"));
    }
    out.push_str("energy\n");
    for e in s.energies() {
        out.push_str(&format!("{e}\n"));
    }
    out
}

pub fn spectrum_from_csv(text: &str) -> Result<Spectrum> {
    let mut source = Source::Synthetic;
    let mut seed = None;
    let mut n_qubits = None;
    let mut energies = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("source:") {
                source = v.trim().parse()?;
            } else if let Some(v) = comment.strip_prefix("seed:") {
                seed = Some(
                    v.trim()
                        .parse::<u64>()
                        .map_err(|e| Error::Parse(format!("bad seed: {e}")))?,
                );
            } else if let Some(v) = comment.strip_prefix("n_qubits:") {
                n_qubits = Some(
                    v.trim()
                        .parse::<u32>()
                        .map_err(|e| Error::Parse(format!("bad n_qubits: {e}")))?,
                );
            }
            continue;
        }
        if line == "energy" {
            continue;
        }
        energies.push(
            line.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad energy `{line}`: {e}")))?,
        );
    }
    Spectrum::new(energies, source, n_qubits, seed)
}

/// Summary form of a partition result for JSON output.
#[derive(Serialize, Deserialize)]
pub struct PartitionReport {
    pub schema: String,
    pub a: SpectrumEnvelope,
    pub b: SpectrumEnvelope,
    pub cost: f64,
    pub spectral_norm: f64,
    pub epsilon_max: f64,
    pub restarts_used: usize,
    pub trace: Vec<(u64, f64)>,
}

pub fn partition_report(e: &Spectrum, result: &PartitionResult) -> PartitionReport {
    let envelope = |s: &Spectrum| SpectrumEnvelope {
        schema: SPECTRUM_JSON_SCHEMA.to_string(),
        energies: s.energies().to_vec(),
        n_qubits: s.n_qubits(),
        source: s.source().to_string(),
        seed: s.seed(),
    };
    PartitionReport {
        schema: PARTITION_JSON_SCHEMA.to_string(),
        a: envelope(&result.a),
        b: envelope(&result.b),
        cost: result.cost,
        spectral_norm: crate::partition::spectral_norm_error(e, result),
        epsilon_max: result.h_int_norm,
        restarts_used: result.restarts_used,
        trace: result.trace.clone(),
    }
}

/// Nested JSON form of a recursive partition tree.
#[derive(Serialize, Deserialize)]
pub struct TreeReport {
    pub schema: String,
    pub depth: usize,
    pub length: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<Box<TreeReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Box<TreeReport>>,
}

pub fn tree_report(tree: &PartitionTree) -> TreeReport {
    let mut report = TreeReport {
        schema: PARTITION_TREE_JSON_SCHEMA.to_string(),
        depth: tree.depth,
        length: tree.spectrum.len(),
        cost: None,
        spectral_norm: None,
        epsilon_max: None,
        a: None,
        b: None,
    };
    if let Some(split) = &tree.split {
        report.cost = Some(split.result.cost);
        report.spectral_norm = Some(split.spectral_norm);
        report.epsilon_max = Some(split.result.h_int_norm);
        report.a = Some(Box::new(tree_report(&split.a)));
        report.b = Some(Box::new(tree_report(&split.b)));
    }
    report
}

/// CSV for a Δ_k sweep: `model,L,k,delta`.
pub fn sweep_to_csv(rows: &[DeltaSweepRow]) -> String {
    let mut out = String::from("model,L,k,delta\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.model, r.length, r.k, r.delta));
    }
    out
}

/// CSV for entanglement growth curves:
/// `t,s_partitioned,s_arbitrary,reference`.
pub fn growth_to_csv(g: &EntropyGrowth) -> String {
    let mut out = String::from("t,s_partitioned,s_arbitrary,reference\n");
    for k in 0..g.times.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            g.times[k], g.s_partitioned[k], g.s_arbitrary[k], g.reference[k]
        ));
    }
    out
}

/// CSV for a thermodynamic curve: `temperature,energy,heat_capacity,entropy`.
pub fn thermo_to_csv(c: &ThermoCurve) -> String {
    let mut out = String::from("temperature,energy,heat_capacity,entropy\n");
    for k in 0..c.temperatures.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            c.temperatures[k], c.energy[k], c.heat_capacity[k], c.entropy[k]
        ));
    }
    out
}

/// CSV for a reconstructed density of states: `energy,rho`.
pub fn reconstruction_to_csv(r: &DosReconstruction) -> String {
    let mut out = String::from("energy,rho\n");
    for (e, d) in r.energies.iter().zip(&r.densities) {
        out.push_str(&format!("{e},{d}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::sample_goe;

    #[test]
    fn spectrum_csv_round_trip() {
        let s = sample_goe(3, 11).unwrap();
        let text = spectrum_to_csv(&s);
        let parsed = spectrum_from_csv(&text).unwrap();
        assert_eq!(s.energies(), parsed.energies());
        assert_eq!(s.source(), parsed.source());
        assert_eq!(s.seed(), parsed.seed());
        assert_eq!(s.n_qubits(), parsed.n_qubits());
    }

    #[test]
    fn spectrum_json_round_trip() {
        let s = sample_goe(2, 5).unwrap();
        let text = spectrum_to_json(&s);
        let parsed = spectrum_from_json(&text).unwrap();
        assert_eq!(s.energies(), parsed.energies());
        assert_eq!(s.source(), parsed.source());
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(spectrum_from_csv("energy\nnot-a-number\n").is_err());
        assert!(spectrum_from_csv("# seed: abc\nenergy\n1.0\n").is_err());
        assert!(spectrum_from_csv("").is_err());
    }

    #[test]
    fn byte_stability() {
        let s = sample_goe(4, 77).unwrap();
        assert_eq!(spectrum_to_csv(&s), spectrum_to_csv(&s));
        let t = spectrum_from_csv(&spectrum_to_csv(&s)).unwrap();
        assert_eq!(spectrum_to_csv(&s), spectrum_to_csv(&t));
    }
}
