//! Single-locus allele-frequency recurrence under weak selection:
//! `x'_j = F_j x_j / X`, with `X = sum_j F_j x_j`.

use std::io::Read;

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatorState {
    frequencies: Vec<f64>,
}

impl ReplicatorState {
    pub fn new(frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::invalid("need at least one allele"));
        }
        if let Some((i, f)) = frequencies
            .iter()
            .enumerate()
            .find(|(_, f)| !(f.is_finite() && **f >= 0.0))
        {
            return Err(Error::invalid(format!("frequency {i} is {f}")));
        }
        let sum: f64 = frequencies.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("frequencies sum to {sum}, not 1")));
        }
        Ok(ReplicatorState { frequencies })
    }

    pub fn uniform(alleles: usize) -> Result<Self> {
        if alleles == 0 {
            return Err(Error::invalid("need at least one allele"));
        }
        Ok(ReplicatorState {
            frequencies: vec![1.0 / alleles as f64; alleles],
        })
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }
}

/// Per-generation mean fitness of each allele: `rows[t][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitnessTrace {
    rows: Vec<Vec<f64>>,
}

impl FitnessTrace {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = rows.first() {
            let width = first.len();
            for (t, row) in rows.iter().enumerate() {
                if row.len() != width {
                    return Err(Error::invalid(format!(
                        "generation {t} has {} alleles, expected {width}",
                        row.len()
                    )));
                }
                check_positive(row, t)?;
            }
        }
        Ok(FitnessTrace { rows })
    }

    /// Builds a trace from one sequence per allele.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let len = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != len) {
            return Err(Error::invalid("allele traces differ in length"));
        }
        Self::from_rows(
            (0..len)
                .map(|t| columns.iter().map(|c| c[t]).collect())
                .collect(),
        )
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn alleles(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, allele: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[allele]).collect()
    }

    /// Repeats the rows cyclically (or truncates) to exactly `steps` rows.
    pub fn cycled(&self, steps: usize) -> Self {
        if self.rows.is_empty() {
            return self.clone();
        }
        FitnessTrace {
            rows: self.rows.iter().cycle().take(steps).cloned().collect(),
        }
    }

    /// Reads CSV: one column per allele, one row per generation. A header
    /// row is accepted when its first field is not a number. Errors carry
    /// the 1-based row and column of the first bad field.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        let mut width = None;
        for (i, record) in rdr.records().enumerate() {
            let line = i + 1;
            let record = record.map_err(|e| Error::parse(format!("row {line}"), e.to_string()))?;
            if i == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
                continue;
            }
            let mut row = Vec::with_capacity(record.len());
            for (j, field) in record.iter().enumerate() {
                let at = || format!("row {line} column {}", j + 1);
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::parse(at(), format!("not a number: {field:?}")))?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::parse(
                        at(),
                        format!("fitness must be positive, got {v}"),
                    ));
                }
                row.push(v);
            }
            match width {
                None => width = Some(row.len()),
                Some(w) if w != row.len() => {
                    return Err(Error::parse(
                        format!("row {line}"),
                        format!("{} columns, expected {w}", row.len()),
                    ))
                }
                _ => {}
            }
            rows.push(row);
        }
        Self::from_rows(rows)
    }
}

fn check_positive(fitnesses: &[f64], t: usize) -> Result<()> {
    match fitnesses.iter().position(|f| !(f.is_finite() && *f > 0.0)) {
        Some(j) => Err(Error::invalid(format!(
            "fitness of allele {j} at generation {t} is {}; must be positive",
            fitnesses[j]
        ))),
        None => Ok(()),
    }
}

pub fn replicator_step(state: &ReplicatorState, fitnesses: &[f64]) -> Result<ReplicatorState> {
    if fitnesses.len() != state.len() {
        return Err(Error::invalid(format!(
            "{} fitnesses for {} alleles",
            fitnesses.len(),
            state.len()
        )));
    }
    check_positive(fitnesses, 0)?;
    let weighted: Vec<f64> = state
        .frequencies
        .iter()
        .zip(fitnesses)
        .map(|(x, f)| x * f)
        .collect();
    let mean_fitness: f64 = weighted.iter().sum();
    Ok(ReplicatorState {
        frequencies: weighted.into_iter().map(|w| w / mean_fitness).collect(),
    })
}

/// Every state along the trace, starting with `initial`.
pub fn run_trace(initial: &ReplicatorState, trace: &FitnessTrace) -> Result<Vec<ReplicatorState>> {
    if !trace.is_empty() && trace.alleles() != initial.len() {
        return Err(Error::invalid(format!(
            "trace has {} alleles, state has {}",
            trace.alleles(),
            initial.len()
        )));
    }
    let mut states = Vec::with_capacity(trace.len() + 1);
    states.push(initial.clone());
    for row in trace.rows() {
        let next = replicator_step(states.last().expect("nonempty"), row)?;
        states.push(next);
    }
    Ok(states)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStats {
    pub arithmetic_mean: f64,
    pub geometric_mean: f64,
    pub variance: f64,
}

impl TraceStats {
    pub fn of(trace: &[f64]) -> Result<Self> {
        if trace.is_empty() {
            return Err(Error::invalid("empty trace"));
        }
        check_positive(trace, 0)?;
        let n = trace.len() as f64;
        let arithmetic_mean = trace.iter().sum::<f64>() / n;
        let geometric_mean = (trace.iter().map(|f| f.ln()).sum::<f64>() / n).exp();
        let variance = trace
            .iter()
            .map(|f| (f - arithmetic_mean).powi(2))
            .sum::<f64>()
            / n;
        Ok(TraceStats {
            arithmetic_mean,
            geometric_mean,
            variance,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceComparison {
    pub a: TraceStats,
    pub b: TraceStats,
    /// The allele with the larger geometric mean fitness, which the
    /// recurrence favours in the long run.
    pub winner: Winner,
}

pub fn variance_comparison(trace_a: &[f64], trace_b: &[f64]) -> Result<VarianceComparison> {
    if trace_a.len() != trace_b.len() {
        return Err(Error::invalid("traces differ in length"));
    }
    let a = TraceStats::of(trace_a)?;
    let b = TraceStats::of(trace_b)?;
    // Compare log-products directly; the means can round to the same value.
    let log_a: f64 = trace_a.iter().map(|f| f.ln()).sum();
    let log_b: f64 = trace_b.iter().map(|f| f.ln()).sum();
    let winner = if trace_a == trace_b || log_a == log_b {
        Winner::Tie
    } else if log_a > log_b {
        Winner::A
    } else {
        Winner::B
    };
    Ok(VarianceComparison { a, b, winner })
}
