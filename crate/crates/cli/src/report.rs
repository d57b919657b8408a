//! Report types shared by all output formats. The JSON form is the source
//! of truth; text and CSV renderings read the same fields, so every number
//! printed round-trips through the JSON output.

use num_rational::BigRational;
use reeb_core::besse_spectra::{InvariantSequence, SpectrumEntry, StratumRecord};
use reeb_core::clarke::SystoleResult;
use reeb_core::convex_body::BodySpec;
use reeb_core::symplectic_index::IndexResult;
use serde::Serialize;

pub trait Report {
    fn json(&self) -> serde_json::Value;
    fn text(&self) -> String;
    fn csv(&self) -> String;
}

fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let render = |cells: Vec<String>, widths: &[usize]| {
        let mut line = String::new();
        for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(&format!("{cell:<w$}"));
        }
        line.trim_end().to_string()
    };
    out.push_str(&render(headers.iter().map(|s| s.to_string()).collect(), &widths));
    out.push('\n');
    for row in rows {
        out.push_str(&render(row.clone(), &widths));
        out.push('\n');
    }
    out
}

fn csv_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = headers.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn one_based(coords: impl IntoIterator<Item = usize>) -> Vec<usize> {
    coords.into_iter().map(|c| c + 1).collect()
}

fn join_coords(coords: &[usize]) -> String {
    let strs: Vec<String> = coords.iter().map(|c| c.to_string()).collect();
    format!("{{{}}}", strs.join(","))
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct SpectrumRow {
    pub sigma: String,
    pub multiplicity: usize,
    pub stratum_dim: usize,
    /// 1-based coordinate planes whose axis divides sigma.
    pub divisor_coords: Vec<usize>,
}

#[derive(Serialize)]
pub struct SpectrumReport {
    pub body: BodySpec,
    pub seed: u64,
    pub cutoff: String,
    pub rows: Vec<SpectrumRow>,
}

impl SpectrumReport {
    pub fn new(body: BodySpec, seed: u64, cutoff: &str, entries: &[SpectrumEntry]) -> Self {
        Self {
            body,
            seed,
            cutoff: cutoff.to_string(),
            rows: entries
                .iter()
                .map(|e| SpectrumRow {
                    sigma: e.sigma.to_string(),
                    multiplicity: e.multiplicity,
                    stratum_dim: e.stratum_dim,
                    divisor_coords: one_based(e.divisor_coords.iter().copied()),
                })
                .collect(),
        }
    }

    fn cells(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.sigma.clone(),
                    r.multiplicity.to_string(),
                    r.stratum_dim.to_string(),
                    join_coords(&r.divisor_coords),
                ]
            })
            .collect()
    }
}

const SPECTRUM_HEADERS: [&str; 4] = ["sigma", "multiplicity", "stratum_dim", "coords"];

impl Report for SpectrumReport {
    fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap()
    }

    fn text(&self) -> String {
        table(&SPECTRUM_HEADERS, &self.cells())
    }

    fn csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.sigma.clone(),
                    r.multiplicity.to_string(),
                    r.stratum_dim.to_string(),
                    r.divisor_coords
                        .iter()
                        .map(|c| c.to_string())
                        .collect::<Vec<_>>()
                        .join(";"),
                ]
            })
            .collect();
        csv_table(&SPECTRUM_HEADERS, &rows)
    }
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct InvariantsReport {
    pub body: BodySpec,
    pub seed: u64,
    /// False when the values come from the approximate (collision-merged)
    /// enumeration of a non-rational ellipsoid.
    pub exact: bool,
    pub values: Vec<String>,
}

impl InvariantsReport {
    pub fn exact(body: BodySpec, seed: u64, seq: &InvariantSequence) -> Self {
        Self {
            body,
            seed,
            exact: true,
            values: seq.values.iter().map(BigRational::to_string).collect(),
        }
    }

    pub fn approximate(body: BodySpec, seed: u64, values: &[(f64, usize)]) -> Self {
        Self {
            body,
            seed,
            exact: false,
            values: values.iter().map(|(v, _)| format!("{v}")).collect(),
        }
    }
}

impl Report for InvariantsReport {
    fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap()
    }

    fn text(&self) -> String {
        format!("{}\n", self.values.join(", "))
    }

    fn csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| vec![i.to_string(), v.clone()])
            .collect();
        csv_table(&["i", "c_i"], &rows)
    }
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct StratumRow {
    pub k: u64,
    pub period: String,
    pub coords: Vec<usize>,
    pub dim: usize,
}

#[derive(Serialize)]
pub struct StrataReport {
    pub body: BodySpec,
    pub seed: u64,
    pub tau: String,
    pub rows: Vec<StratumRow>,
}

const STRATA_HEADERS: [&str; 4] = ["k", "period", "coords", "dim"];

impl StrataReport {
    pub fn new(body: BodySpec, seed: u64, tau: &BigRational, strata: &[StratumRecord]) -> Self {
        Self {
            body,
            seed,
            tau: tau.to_string(),
            rows: strata
                .iter()
                .map(|s| StratumRow {
                    k: s.k,
                    period: s.period.to_string(),
                    coords: one_based(s.coords.iter().copied()),
                    dim: s.dim,
                })
                .collect(),
        }
    }

    fn cells(&self, semicolons: bool) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let coords = if semicolons {
                    r.coords
                        .iter()
                        .map(|c| c.to_string())
                        .collect::<Vec<_>>()
                        .join(";")
                } else {
                    join_coords(&r.coords)
                };
                vec![r.k.to_string(), r.period.clone(), coords, r.dim.to_string()]
            })
            .collect()
    }
}

impl Report for StrataReport {
    fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap()
    }

    fn text(&self) -> String {
        format!("tau = {}\n{}", self.tau, table(&STRATA_HEADERS, &self.cells(false)))
    }

    fn csv(&self) -> String {
        csv_table(&STRATA_HEADERS, &self.cells(true))
    }
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct BesseReport {
    pub body: BodySpec,
    pub seed: u64,
    pub n: usize,
    pub horizon: usize,
    pub exact: bool,
    pub index: Option<usize>,
    pub value: Option<String>,
}

impl BesseReport {
    pub fn new(
        body: BodySpec,
        seed: u64,
        n: usize,
        horizon: usize,
        exact: bool,
        index: Option<usize>,
        value: Option<String>,
    ) -> Self {
        Self {
            body,
            seed,
            n,
            horizon,
            exact,
            index,
            value,
        }
    }
}

impl Report for BesseReport {
    fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap()
    }

    fn text(&self) -> String {
        match (self.index, &self.value) {
            (Some(i), Some(v)) => format!(
                "Besse-consistent at i={i} (c_{i} = c_{} = {v})\n",
                i + self.n - 1
            ),
            _ => format!(
                "no Besse coincidence within the first {} invariants\n",
                self.horizon
            ),
        }
    }

    fn csv(&self) -> String {
        let row = vec![
            self.index.map_or_else(String::new, |i| i.to_string()),
            self.value.clone().unwrap_or_default(),
            self.n.to_string(),
            self.horizon.to_string(),
        ];
        csv_table(&["index", "value", "n", "horizon"], &[row])
    }
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct SystoleReport {
    pub body: BodySpec,
    pub seed: u64,
    pub modes: usize,
    pub restarts: usize,
    pub c0: f64,
    pub period: f64,
    pub index: Option<usize>,
    pub nullity: Option<usize>,
    pub residual: f64,
    pub restart_values: Vec<f64>,
    pub converged_restarts: usize,
}

impl SystoleReport {
    pub fn new(body: BodySpec, modes: usize, result: &SystoleResult) -> Self {
        Self {
            body,
            seed: result.seed,
            modes,
            restarts: result.outcomes.len(),
            c0: result.c0,
            period: result.orbit.period,
            index: result.orbit.index,
            nullity: result.orbit.nullity,
            residual: result.orbit.residual,
            restart_values: result.outcomes.iter().map(|o| o.value).collect(),
            converged_restarts: result.outcomes.iter().filter(|o| o.converged).count(),
        }
    }
}

impl Report for SystoleReport {
    fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap()
    }

    fn text(&self) -> String {
        let mut out = format!(
            "c0 = {}\nperiod = {}\nindex = {}  nullity = {}\nresidual = {}\n",
            self.c0,
            self.period,
            self.index.map_or_else(|| "-".into(), |i| i.to_string()),
            self.nullity.map_or_else(|| "-".into(), |i| i.to_string()),
            self.residual,
        );
        out.push_str(&format!(
            "restarts converged: {}/{} (seed {})\n",
            self.converged_restarts, self.restarts, self.seed
        ));
        out
    }

    fn csv(&self) -> String {
        let row = vec![
            format!("{}", self.c0),
            format!("{}", self.period),
            self.index.map_or_else(String::new, |i| i.to_string()),
            self.nullity.map_or_else(String::new, |i| i.to_string()),
            format!("{}", self.residual),
            self.seed.to_string(),
        ];
        csv_table(&["c0", "period", "index", "nullity", "residual", "seed"], &[row])
    }
}

// ---------------------------------------------------------------------------

#[derive(Serialize)]
pub struct CrossingRow {
    pub t: f64,
    pub kernel_dim: usize,
    pub refined: bool,
}

#[derive(Serialize)]
pub struct OrbitIndexReport {
    pub body: BodySpec,
    pub seed: u64,
    /// "exact" for the combinatorial ellipsoid formula, "numeric" for the
    /// crossing sweep along an integrated orbit.
    pub method: String,
    pub coord: Option<usize>,
    pub iterate: Option<u64>,
    pub period: String,
    pub index: u64,
    pub nullity: u64,
    pub crossings: Option<Vec<CrossingRow>>,
}

impl OrbitIndexReport {
    pub fn exact(
        body: BodySpec,
        seed: u64,
        coord: usize,
        iterate: u64,
        period: String,
        index: u64,
        nullity: u64,
    ) -> Self {
        Self {
            body,
            seed,
            method: "exact".into(),
            coord: Some(coord),
            iterate: Some(iterate),
            period,
            index,
            nullity,
            crossings: None,
        }
    }

    pub fn numeric(body: BodySpec, seed: u64, period: f64, result: &IndexResult) -> Self {
        Self {
            body,
            seed,
            method: "numeric".into(),
            coord: None,
            iterate: None,
            period: format!("{period}"),
            index: result.index as u64,
            nullity: result.nullity as u64,
            crossings: Some(
                result
                    .crossings
                    .iter()
                    .map(|c| CrossingRow {
                        t: c.t,
                        kernel_dim: c.kernel_dim,
                        refined: c.refined,
                    })
                    .collect(),
            ),
        }
    }
}

impl Report for OrbitIndexReport {
    fn json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap()
    }

    fn text(&self) -> String {
        let mut out = format!(
            "period = {}\nindex = {}  nullity = {}  [{}]\n",
            self.period, self.index, self.nullity, self.method
        );
        if let Some(crossings) = &self.crossings {
            let rows: Vec<Vec<String>> = crossings
                .iter()
                .map(|c| {
                    vec![
                        format!("{}", c.t),
                        c.kernel_dim.to_string(),
                        c.refined.to_string(),
                    ]
                })
                .collect();
            out.push_str(&table(&["t", "kernel_dim", "refined"], &rows));
        }
        out
    }

    fn csv(&self) -> String {
        let row = vec![
            self.period.clone(),
            self.index.to_string(),
            self.nullity.to_string(),
            self.method.clone(),
        ];
        csv_table(&["period", "index", "nullity", "method"], &[row])
    }
}
