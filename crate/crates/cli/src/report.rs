//! Run reports: one byte-stable JSON document per run plus an aligned
//! plain-text summary table. Timing is printed to stdout only, so reports
//! with the same config and seed compare byte-identical.

use loewner_core::bounds::BoundCertificate;
use loewner_core::envelope::{EnvelopePair, EnvelopeReport, FitLog};
use loewner_core::maps::SpectrumRange;
use loewner_core::tails::TailReport;
use loewner_core::wbound::{DominationReport, ScalingReport, WBoundResult, WBoundVerifyReport};
use serde::{Deserialize, Serialize};

use crate::config::{OperatorDoc, ScenarioConfig};

#[derive(Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub tool: ToolInfo,
    pub master_seed: u64,
    pub scenario: ScenarioConfig,
    pub results: RunResults,
    pub status: String,
    pub failures: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl ToolInfo {
    pub fn current() -> Self {
        ToolInfo {
            name: "loewner".into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunResults {
    FitEnvelope {
        pair: EnvelopePair,
        verification: EnvelopeReport,
        schedule: FitLog,
    },
    Certify {
        certificates: Vec<CertificateRecord>,
    },
    Wbound {
        constant: WBoundResult,
        verification: Option<WBoundVerifyReport>,
        scaling: Vec<ScalingReport>,
        domination: Option<DominationReport>,
    },
    Tails {
        reports: Vec<TailReport>,
    },
}

/// Serializable certificate: everything in the in-memory certificate, with
/// the operators in wire format.
#[derive(Debug, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub inequality_id: String,
    pub side: String,
    pub constant: f64,
    pub constant_provenance: String,
    pub witness: f64,
    pub holds: bool,
    pub ranges_used: Vec<SpectrumRange>,
    pub notes: Vec<String>,
    pub lhs: OperatorDoc,
    pub rhs: OperatorDoc,
}

impl CertificateRecord {
    pub fn from_certificate(cert: &BoundCertificate) -> Self {
        let doc = |op: &loewner_core::HermitianOperator| OperatorDoc {
            dim: op.dim(),
            entries: op.to_row_major_pairs(),
        };
        CertificateRecord {
            inequality_id: cert.inequality_id.clone(),
            side: cert.side.label().into(),
            constant: cert.constant,
            constant_provenance: cert.constant_provenance.clone(),
            witness: cert.witness,
            holds: cert.holds,
            ranges_used: cert.ranges_used.clone(),
            notes: cert.notes.clone(),
            lhs: doc(&cert.lhs),
            rhs: doc(&cert.rhs),
        }
    }
}

/// Aligned plain-text summary: one row per certificate or check.
pub fn summary_table(rows: &[(String, String, String)]) -> String {
    let widths = rows.iter().fold((4, 6, 0), |acc, (a, b, _)| {
        (acc.0.max(a.len()), acc.1.max(b.len()), 0)
    });
    let mut out = String::new();
    out.push_str(&format!("{:<w0$}  {:<w1$}  detail\n", "item", "status", w0 = widths.0, w1 = widths.1));
    for (item, status, detail) in rows {
        out.push_str(&format!("{item:<w0$}  {status:<w1$}  {detail}\n", w0 = widths.0, w1 = widths.1));
    }
    out
}
