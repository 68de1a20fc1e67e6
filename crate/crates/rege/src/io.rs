//! Text export formats: edge lists, CSV tables, JSON reports, checkpoints.
//!
//! Every writer is deterministic for identical inputs and goes through a
//! write-temp-then-rename so partially written files never land under the
//! target name.

use std::fs;
use std::path::Path;

use crate::error::{RegeError, Result};
use crate::graph::Graph;
use crate::nn::GcnParams;
use crate::perturb::{ExperimentReport, SweepRow};
use crate::radii::RadiusVector;
use crate::spectral::{retained_energy, EigenDecomposition, ViewSequence};
use crate::trainer::TrainReport;

/// Writes `content` atomically: to `<path>.tmp` first, then rename.
pub fn atomic_write(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| RegeError::io(parent, e))?;
        }
    }
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, content).map_err(|e| RegeError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| RegeError::io(path, e))?;
    Ok(())
}

/// Canonical edge-list text: `u v` per line, `u < v`, lexicographic order.
pub fn edge_list_text(graph: &Graph) -> String {
    let mut out = String::new();
    for (u, v) in graph.edge_list() {
        out.push_str(&format!("{u} {v}\n"));
    }
    out
}

/// Edge-list text for a raw binary view matrix.
pub fn view_edge_list_text(view: &nalgebra::DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..view.nrows() {
        for j in (i + 1)..view.ncols() {
            if view[(i, j)] > 0.0 {
                out.push_str(&format!("{i} {j}\n"));
            }
        }
    }
    out
}

/// Writes one `view_XXXX.txt` per view into `dir`.
pub fn write_views(dir: &Path, views: &ViewSequence) -> Result<Vec<std::path::PathBuf>> {
    let mut paths = Vec::with_capacity(views.len());
    for (count, view) in views.iter() {
        let path = dir.join(format!("view_{count:04}.txt"));
        atomic_write(&path, &view_edge_list_text(view))?;
        paths.push(path);
    }
    Ok(paths)
}

/// `components,energy` table over the view schedule.
pub fn energy_table_text(decomp: &EigenDecomposition, counts: &[usize]) -> Result<String> {
    let mut out = String::from("components,energy\n");
    for &q in counts {
        out.push_str(&format!("{q},{:.12}\n", retained_energy(decomp, q)?));
    }
    Ok(out)
}

/// `node_id,radius,kind` table.
pub fn radii_csv_text(radii: &RadiusVector) -> String {
    let mut out = String::from("node_id,radius,kind\n");
    for (i, v) in radii.values().iter().enumerate() {
        out.push_str(&format!("{i},{v:.12},{}\n", radii.kind().as_str()));
    }
    out
}

/// Dense consensus matrix as CSV rows.
pub fn consensus_csv_text(w: &crate::radii::ConsensusMatrix) -> String {
    let m = w.matrix();
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.12}", m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// `dimension,q_hat` calibration offsets for diagnostics.
pub fn qhat_csv_text(calibration: &crate::mdr::ConformalCalibration) -> String {
    let mut out = String::from("dimension,q_hat\n");
    for (j, q) in calibration.q_hat.iter().enumerate() {
        out.push_str(&format!("{j},{q:.12}\n"));
    }
    out
}

/// `method,attack,budget,seed,accuracy` raw rows.
pub fn experiment_csv_text(report: &ExperimentReport) -> String {
    let mut out = String::from("method,attack,budget,seed,accuracy\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{:.6},{},{:.6}\n",
            r.method, r.attack, r.budget, r.seed, r.accuracy
        ));
    }
    out
}

/// `method,attack,budget,mean,std,runs` aggregate rows.
pub fn summary_csv_text(report: &ExperimentReport) -> String {
    let mut out = String::from("method,attack,budget,mean,std,runs\n");
    for s in &report.summary {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6},{}\n",
            s.method, s.attack, s.budget, s.mean, s.std, s.runs
        ));
    }
    out
}

/// `q,views_total,views_trained,accuracy` sweep table.
pub fn sweep_csv_text(rows: &[SweepRow]) -> String {
    let mut out = String::from("q,views_total,views_trained,accuracy\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6}\n",
            r.q, r.views_total, r.views_trained, r.accuracy
        ));
    }
    out
}

/// Training report as pretty JSON (wall-clock excluded by its serializer).
pub fn report_json_text(report: &TrainReport) -> Result<String> {
    serde_json::to_string_pretty(report)
        .map_err(|e| RegeError::Numerical(format!("report serialization: {e}")))
}

/// Checkpoint format: versioned JSON with shapes and row-major values.
#[derive(serde::Serialize, serde::Deserialize)]
struct Checkpoint {
    version: u32,
    w1_shape: (usize, usize),
    w1: Vec<f64>,
    w2_shape: (usize, usize),
    w2: Vec<f64>,
}

pub fn checkpoint_text(params: &GcnParams) -> Result<String> {
    let flat = |m: &nalgebra::DMatrix<f64>| -> Vec<f64> {
        let mut v = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                v.push(m[(i, j)]);
            }
        }
        v
    };
    serde_json::to_string(&Checkpoint {
        version: 1,
        w1_shape: params.w1.shape(),
        w1: flat(&params.w1),
        w2_shape: params.w2.shape(),
        w2: flat(&params.w2),
    })
    .map_err(|e| RegeError::Numerical(format!("checkpoint serialization: {e}")))
}

pub fn load_checkpoint(text: &str) -> Result<GcnParams> {
    let ckpt: Checkpoint = serde_json::from_str(text)
        .map_err(|e| RegeError::Numerical(format!("checkpoint parse: {e}")))?;
    if ckpt.version != 1 {
        return Err(RegeError::parameter(
            "checkpoint",
            format!("unsupported version {}", ckpt.version),
        ));
    }
    let unflat = |shape: (usize, usize), data: &[f64]| -> Result<nalgebra::DMatrix<f64>> {
        if data.len() != shape.0 * shape.1 {
            return Err(RegeError::dimension(
                "checkpoint",
                format!("{}x{} values", shape.0, shape.1),
                format!("{} values", data.len()),
            ));
        }
        Ok(nalgebra::DMatrix::from_fn(shape.0, shape.1, |i, j| {
            data[i * shape.1 + j]
        }))
    };
    Ok(GcnParams {
        w1: unflat(ckpt.w1_shape, &ckpt.w1)?,
        w2: unflat(ckpt.w2_shape, &ckpt.w2)?,
    })
}
