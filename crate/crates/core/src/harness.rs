//! Runs one configured experiment to disk: the metrics CSV (written row by
//! row), a parameter checkpoint, and two sidecar CSVs with the per-update
//! reconstruction trace and the per-pair acquisition values.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::active::{run_strategy, IterationDiagnostics, RunOutput};
use crate::checkpoint;
use crate::config::{DatasetSource, ExperimentConfig};
use crate::data::{make_synthetic, read_container, RawDataset};
use crate::error::{Error, Result};
use crate::metrics::CSV_HEADER;

pub const RECON_HEADER: &str = "iteration,update,recon_distance";
pub const ACQ_HEADER: &str = "iteration,pool_id,a_selected,a_generated,gap,subsample_median,subsample_iqr";

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<RawDataset> {
    match &cfg.dataset {
        DatasetSource::Synthetic {
            n_per_class,
            classes,
            dim,
            spread,
        } => make_synthetic(*n_per_class, *classes, *dim, *spread, cfg.seed),
        DatasetSource::Idx { images, labels } => RawDataset::load_idx(images, labels, None),
        DatasetSource::Container(path) => read_container(path),
    }
}

/// Output file locations for one (strategy, seed).
#[derive(Clone, Debug, PartialEq)]
pub struct RunPaths {
    pub metrics: PathBuf,
    pub checkpoint: PathBuf,
    pub recon: PathBuf,
    pub acq: PathBuf,
}

impl RunPaths {
    pub fn new(out_dir: &Path, cfg: &ExperimentConfig) -> Self {
        let stem = format!("{}_seed{}", cfg.strategy, cfg.seed);
        RunPaths {
            metrics: out_dir.join(format!("{stem}.csv")),
            checkpoint: out_dir.join(format!("{stem}.ckpt")),
            recon: out_dir.join(format!("{stem}_recon.csv")),
            acq: out_dir.join(format!("{stem}_acq.csv")),
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))
}

fn write_all(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn recon_csv(diagnostics: &[IterationDiagnostics]) -> String {
    let mut s = format!("{RECON_HEADER}\n");
    let mut update = 0usize;
    for d in diagnostics {
        for r in &d.recon_trace {
            s.push_str(&format!("{},{update},{r}\n", d.iteration));
            update += 1;
        }
    }
    s
}

pub fn acq_csv(diagnostics: &[IterationDiagnostics]) -> String {
    let mut s = format!("{ACQ_HEADER}\n");
    for d in diagnostics {
        let (median, iqr) = d
            .report
            .as_ref()
            .map(|r| (r.score_stats.median, r.score_stats.iqr))
            .unwrap_or_default();
        for (id, g) in d.acquired_ids.iter().zip(&d.gaps) {
            s.push_str(&format!(
                "{},{id},{},{},{},{median},{iqr}\n",
                d.iteration, g.a_star, g.a_prime, g.gap
            ));
        }
    }
    s
}

/// Runs `cfg` and writes its outputs under `out_dir`. The metrics file is
/// flushed after every row, so an aborted run leaves its completed rows.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(RunPaths, RunOutput)> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let dataset = load_dataset(cfg)?;
    let paths = RunPaths::new(out_dir, cfg);
    let mut metrics = create(&paths.metrics)?;
    let io_err = |e| Error::io(format!("writing {}", paths.metrics.display()), e);
    writeln!(metrics, "{CSV_HEADER}").map_err(io_err)?;
    metrics.flush().map_err(io_err)?;
    let output = run_strategy(cfg, &dataset, |record| {
        writeln!(metrics, "{}", record.to_csv_row()).map_err(io_err)?;
        metrics.flush().map_err(io_err)
    })?;
    drop(metrics);
    checkpoint::save(&paths.checkpoint, &output.params)?;
    write_all(&paths.recon, &recon_csv(&output.diagnostics))?;
    write_all(&paths.acq, &acq_csv(&output.diagnostics))?;
    Ok((paths, output))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::active::Strategy;
    use crate::metrics::parse_csv;

    fn tiny(strategy: Strategy, iterations: usize) -> ExperimentConfig {
        let text = format!(
            "strategy={strategy}\niterations={iterations}\nsynth_n_per_class=40\nsynth_classes=3\nsynth_dim=6\n\
             n_init_labeled=12\nn_test=30\nk_per_iteration=4\npool_subsample=20\nmc_passes=3\n\
             latent_dim=2\nembed_dim=2\nclassifier_hidden=8\nencoder_hidden=6\ngenerator_hidden=6\n\
             discriminator_hidden=6\npretrain_epochs=2\nbatch_size=8\ngen_replay=4\n"
        );
        ExperimentConfig::parse(&text, Path::new(".")).unwrap()
    }

    #[test]
    fn zero_iterations_writes_header_and_pretrain_row() {
        let dir = tempfile::tempdir().unwrap();
        let (paths, _) = run_experiment(&tiny(Strategy::RandomSelection, 0), dir.path()).unwrap();
        let text = std::fs::read_to_string(&paths.metrics).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert!(paths.checkpoint.exists());
    }

    #[test]
    fn rerun_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let cfg = tiny(Strategy::AlVaeAcgan, 2);
        let (pa, _) = run_experiment(&cfg, a.path()).unwrap();
        let (pb, _) = run_experiment(&cfg, b.path()).unwrap();
        for (x, y) in [
            (&pa.metrics, &pb.metrics),
            (&pa.checkpoint, &pb.checkpoint),
            (&pa.recon, &pb.recon),
            (&pa.acq, &pb.acq),
        ] {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
        let acq = std::fs::read_to_string(&pa.acq).unwrap();
        assert_eq!(acq.lines().count(), 1 + 2 * 4);
    }

    #[test]
    fn strategy_sweep_aligns_iterations() {
        let dir = tempfile::tempdir().unwrap();
        let mut iterations = Vec::new();
        for s in [Strategy::RandomSelection, Strategy::AlNoDa, Strategy::AlVaeAcgan] {
            let (p, _) = run_experiment(&tiny(s, 2), dir.path()).unwrap();
            let recs = parse_csv(&std::fs::read_to_string(p.metrics).unwrap()).unwrap();
            iterations.push(recs.iter().map(|r| r.iteration).collect::<Vec<_>>());
        }
        assert!(iterations.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(iterations[0], vec![0, 1, 2]);
    }

    #[test]
    fn missing_idx_file_is_an_io_error() {
        let mut cfg = tiny(Strategy::RandomSelection, 0);
        cfg.dataset = DatasetSource::Idx {
            images: "/nonexistent/images".into(),
            labels: "/nonexistent/labels".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(run_experiment(&cfg, dir.path()), Err(Error::Io { .. })));
    }
}
