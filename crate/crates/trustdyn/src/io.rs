//! File formats: the shared dataset CSV, ground-truth labels, prior JSON and
//! result tables.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use trustdyn_core::datagen::{Archetype, GroundTruth};
use trustdyn_core::{AgentId, AgentRecord, Outcome, PriorModel, ThetaParams};

pub const DATASET_HEADER: [&str; 4] = ["agent_id", "trial", "performance", "trust"];

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRow {
    agent_id: String,
    trial: usize,
    performance: u8,
    trust: Option<f64>,
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

/// Write records in order, one row per trial.
pub fn write_dataset(path: &Path, records: &[AgentRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(DATASET_HEADER)?;
    for r in records {
        for (i, o) in r.outcomes().iter().enumerate() {
            w.serialize(DatasetRow {
                agent_id: r.id.0.clone(),
                trial: i + 1,
                performance: o.as_u8(),
                trust: r.report(i + 1),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a dataset. Agents keep the order of their first row; each agent's
/// trials must run 1..=n without gaps.
pub fn read_dataset(path: &Path) -> Result<Vec<AgentRecord>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != DATASET_HEADER {
        bail!("{}: header must be `{}`", path.display(), DATASET_HEADER.join(","));
    }
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, (Vec<Outcome>, BTreeMap<usize, f64>)> = BTreeMap::new();
    for (line, row) in rdr.deserialize::<DatasetRow>().enumerate() {
        let row = row.with_context(|| format!("{} row {}", path.display(), line + 2))?;
        let entry = rows.entry(row.agent_id.clone()).or_insert_with(|| {
            order.push(row.agent_id.clone());
            Default::default()
        });
        if row.trial != entry.0.len() + 1 {
            bail!(
                "{}: agent {} has trial {} where {} was expected",
                path.display(),
                row.agent_id,
                row.trial,
                entry.0.len() + 1
            );
        }
        let outcome = Outcome::try_from(row.performance)
            .with_context(|| format!("{}: agent {} trial {}", path.display(), row.agent_id, row.trial))?;
        entry.0.push(outcome);
        if let Some(t) = row.trust {
            entry.1.insert(row.trial, t);
        }
    }
    if order.is_empty() {
        bail!("{}: no rows", path.display());
    }
    order
        .into_iter()
        .map(|id| {
            let (outcomes, reports) = rows.remove(&id).expect("seen id");
            AgentRecord::new(id.as_str(), outcomes, reports).with_context(|| format!("agent {id}"))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    agent_id: String,
    archetype: Archetype,
    alpha0: Option<f64>,
    beta0: Option<f64>,
    ws: Option<f64>,
    wf: Option<f64>,
}

pub const LABELS_HEADER: [&str; 6] = ["agent_id", "archetype", "alpha0", "beta0", "ws", "wf"];

pub fn write_labels(path: &Path, labels: &[GroundTruth]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(LABELS_HEADER)?;
    for l in labels {
        let t = l.theta.map(ThetaParams::to_array);
        w.serialize(LabelRow {
            agent_id: l.id.0.clone(),
            archetype: l.archetype,
            alpha0: t.map(|a| a[0]),
            beta0: t.map(|a| a[1]),
            ws: t.map(|a| a[2]),
            wf: t.map(|a| a[3]),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<Vec<GroundTruth>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    rdr.deserialize::<LabelRow>()
        .map(|row| {
            let row = row?;
            let theta = match (row.alpha0, row.beta0, row.ws, row.wf) {
                (Some(a), Some(b), Some(s), Some(f)) => Some(ThetaParams::new(a, b, s, f)?),
                _ => None,
            };
            Ok(GroundTruth {
                id: AgentId(row.agent_id),
                archetype: row.archetype,
                theta,
            })
        })
        .collect()
}

pub fn write_prior(path: &Path, prior: &PriorModel) -> Result<()> {
    let mut text = serde_json::to_string_pretty(prior)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_prior(path: &Path) -> Result<PriorModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let prior: PriorModel = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    prior.validate().with_context(|| format!("{}", path.display()))?;
    Ok(prior)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// Write `header`, then one line per serialized row.
pub fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows of a headed CSV written by [`write_rows`].
pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    rdr.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .with_context(|| format!("reading {}", path.display()))
}
