use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use fpca_core::charfun::SampleSet;
use fpca_core::gmm::{learn_from_moments, learn_spherical_mixture, AnalyticMoments, GaussianMixtureModel};
use fpca_core::ica::{fourier_pca, fourier_pca_noisy, replica_seed, run_replicas, underdetermined_ica};
use fpca_core::linalg::RealMatrix;
use fpca_core::report::RecoveryReport;
use fpca_core::synth::{
    kr_condition_experiment, random_mixing_matrix, random_orthogonal, random_spherical_mixture,
    random_tensor_pair, sample_gmm, sample_ica, write_kr_csv, IcaModel, MixingKind, SourceKind, SourceSpec,
    DEFAULT_CONDITION_FLOOR,
};
use fpca_core::tensor_decomp::{tensor_decompose, DecomposeOptions, RankSpec, TensorPairFile};

use crate::config::{DataConfig, RunConfig};
use crate::failure::Failure;
use crate::{Command, DataArgs, GenCommand, MixingArg};

pub fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<(), Failure> {
    let seed = cfg.seed.unwrap_or(0);
    let replicas = cfg.replicas.unwrap_or(1);
    let out = cfg.out.as_deref();
    match cmd {
        Command::Ica { data, noisy } => {
            let data = merge(&cfg.data, data);
            let (samples, truth) = ica_data(&data, seed)?;
            let p = cfg.params;
            let report = run_replicas(replicas, seed, truth.as_ref().map(|a| (a, 2)), |s| {
                if *noisy {
                    fourier_pca_noisy(&samples, &p, s, truth.as_ref())
                } else {
                    fourier_pca(&samples, &p, s, truth.as_ref())
                }
            })?;
            emit_report(&report, out)
        }
        Command::Uica { data, m } => {
            let data = merge(&cfg.data, data);
            let (samples, truth) = ica_data(&data, seed)?;
            let m = m
                .or(truth.as_ref().map(|a| a.ncols()))
                .ok_or_else(|| Failure::config("uica needs --m or a ground-truth model"))?;
            let p = cfg.params;
            let report = run_replicas(replicas, seed, truth.as_ref().map(|a| (a, p.d)), |s| {
                underdetermined_ica(&samples, &p, m, s, truth.as_ref())
            })?;
            emit_report(&report, out)
        }
        Command::Gmm { data, k, analytic } => {
            single_run(replicas, "gmm")?;
            let data = merge(&cfg.data, data);
            let truth = match (&data.truth, &data.model) {
                (Some(path), _) | (None, Some(path)) => Some(read_json(path, GaussianMixtureModel::read)?),
                (None, None) => None,
            };
            let k = k
                .or(truth.as_ref().map(|t| t.k))
                .ok_or_else(|| Failure::config("gmm needs --k or a ground-truth model"))?;
            let (_, report) = if *analytic {
                let model = match &data.model {
                    Some(path) => read_json(path, GaussianMixtureModel::read)?,
                    None => return Err(Failure::config("--analytic needs --model")),
                };
                let src = AnalyticMoments::new(model, None)?;
                learn_from_moments(&src, k, &cfg.gmm, seed, truth.as_ref())?
            } else {
                let samples = match (&data.input, &data.model) {
                    (Some(path), _) => read_samples(path, data.header)?,
                    (None, Some(_)) => {
                        let model = truth.as_ref().expect("model read above");
                        sample_gmm(model, sample_count(&data)?, seed)?
                    }
                    (None, None) => return Err(Failure::config("gmm needs --input or --model")),
                };
                learn_spherical_mixture(&samples, k, &cfg.gmm, seed, truth.as_ref())?
            };
            emit_report(&report, out)
        }
        Command::Tensor { input, rank } => {
            single_run(replicas, "tensor")?;
            let rank = if rank == "auto" {
                RankSpec::Auto
            } else {
                RankSpec::Known(
                    rank.parse()
                        .map_err(|_| Failure::config(format!("rank '{rank}' is neither a count nor 'auto'")))?,
                )
            };
            let file = read_json(input, TensorPairFile::read)?;
            let (pair, truth) = file.to_pair()?;
            let opts = DecomposeOptions {
                tol: cfg.params.eig_tol,
                basis: cfg.params.basis,
                phase_tol: cfg.params.phase_tol,
            };
            let start = Instant::now();
            let (cols, diag) = tensor_decompose(&pair, rank, &opts)?;
            let mut report = RecoveryReport::new("tensor_decompose", &cols, seed, 0);
            report.diagnostics.eigenvalues = diag.eigenvalues.clone();
            report.diagnostics.min_gap = diag.min_ratio_gap;
            report.diagnostics.decomposition = Some(diag);
            report.timings.wall_seconds = start.elapsed().as_secs_f64();
            if let Some(a) = truth {
                report.attach_truth(&a, pair.order())?;
            }
            emit_report(&report, out)
        }
        Command::BenchKr { n, d, trials } => {
            let rows = kr_condition_experiment(*n, *d, *trials, seed)?;
            let mut buf = Vec::new();
            write_kr_csv(&rows, &mut buf)?;
            emit(&buf, out)
        }
        Command::Gen { what } => generate(what, seed, out),
    }
}

fn single_run(replicas: usize, what: &str) -> Result<(), Failure> {
    if replicas > 1 {
        return Err(Failure::config(format!("--replicas applies to ica and uica, not {what}")));
    }
    Ok(())
}

fn merge(base: &DataConfig, args: &DataArgs) -> DataConfig {
    DataConfig {
        input: args.input.clone().or_else(|| base.input.clone()),
        header: args.header || base.header,
        model: args.model.clone().or_else(|| base.model.clone()),
        samples: args.samples.or(base.samples),
        truth: args.truth.clone().or_else(|| base.truth.clone()),
    }
}

fn read_json<T>(path: &Path, read: impl Fn(BufReader<File>) -> fpca_core::Result<T>) -> Result<T, Failure> {
    let f = File::open(path).map_err(|e| Failure::io(format!("{}: {e}", path.display())))?;
    read(BufReader::new(f)).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn read_samples(path: &Path, header: bool) -> Result<SampleSet, Failure> {
    SampleSet::read_csv_path(path, header).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn sample_count(data: &DataConfig) -> Result<usize, Failure> {
    data.samples
        .ok_or_else(|| Failure::config("--samples is required when drawing from --model"))
}

/// Samples and optional true mixing matrix for the ICA commands.
fn ica_data(data: &DataConfig, seed: u64) -> Result<(SampleSet, Option<RealMatrix>), Failure> {
    let model = match &data.model {
        Some(path) => Some(read_json(path, IcaModel::read)?),
        None => None,
    };
    let truth = match &data.truth {
        Some(path) => Some(read_json(path, IcaModel::read)?.mixing_matrix()),
        None => model.as_ref().map(|m| m.mixing_matrix()),
    };
    let samples = match (&data.input, &model) {
        (Some(path), _) => read_samples(path, data.header)?,
        (None, Some(m)) => sample_ica(m, sample_count(data)?, seed)?,
        (None, None) => return Err(Failure::config("need --input or --model")),
    };
    Ok((samples, truth))
}

fn parse_source(s: &str) -> Result<SourceSpec, Failure> {
    let spec = match s.split_once(':') {
        None => match s {
            "rademacher" => SourceSpec::rademacher(),
            "uniform" => SourceSpec::unit_uniform(),
            "gaussian" => SourceSpec::gaussian(1.0),
            "laplace" => SourceSpec::new(SourceKind::Laplace {
                b: std::f64::consts::FRAC_1_SQRT_2,
            })?,
            _ => return Err(Failure::config(format!("unknown source '{s}'"))),
        },
        Some(("bernoulli", p)) => {
            let p: f64 = p.parse().map_err(|_| Failure::config(format!("bad bernoulli parameter in '{s}'")))?;
            SourceSpec::new(SourceKind::BernoulliCentered { p })?
        }
        _ => return Err(Failure::config(format!("unknown source '{s}'"))),
    };
    Ok(spec)
}

fn generate(what: &GenCommand, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    // samples use a stream family separate from the model draws
    let sample_seed = replica_seed(seed, 1);
    match what {
        GenCommand::Ica {
            n,
            m,
            source,
            mixing,
            noise,
            d,
            samples,
            model_out,
        } => {
            let m = m.unwrap_or(*n);
            let a = match mixing {
                MixingArg::Orthogonal => {
                    if m != *n {
                        return Err(Failure::config("orthogonal mixing needs m = n"));
                    }
                    random_orthogonal(*n, seed)
                }
                MixingArg::Gaussian => {
                    random_mixing_matrix(*n, m, MixingKind::GaussianColumns, *d, seed, DEFAULT_CONDITION_FLOOR)?.0
                }
                MixingArg::Rademacher => {
                    random_mixing_matrix(*n, m, MixingKind::RademacherColumns, *d, seed, DEFAULT_CONDITION_FLOOR)?.0
                }
            };
            if noise.is_nan() || *noise < 0.0 {
                return Err(Failure::config("noise variance must be nonnegative"));
            }
            let cov = (*noise > 0.0).then(|| RealMatrix::identity(*n, *n) * *noise);
            let model = IcaModel::new(&a, vec![parse_source(source)?; m], cov.as_ref())?;
            let mut json = Vec::new();
            model.write(&mut json)?;
            let csv = match samples {
                Some(count) => Some(sample_ica(&model, *count, sample_seed)?),
                None => None,
            };
            write_model_and_samples(&json, csv.as_ref(), model_out.as_ref(), out)
        }
        GenCommand::Gmm {
            n,
            k,
            separation,
            sd_min,
            sd_max,
            samples,
            model_out,
        } => {
            let model = random_spherical_mixture(*n, *k, *separation, (*sd_min, *sd_max), seed)?;
            let mut json = Vec::new();
            model.write(&mut json)?;
            let csv = match samples {
                Some(count) => Some(sample_gmm(&model, *count, sample_seed)?),
                None => None,
            };
            write_model_and_samples(&json, csv.as_ref(), model_out.as_ref(), out)
        }
        GenCommand::Tensor { n, d, m, floor, min_gap } => {
            let (pair, a, _) = random_tensor_pair(*n, *d, *m, *floor, *min_gap, seed)?;
            let mut json = Vec::new();
            TensorPairFile::from_pair(&pair, Some(&a)).write(&mut json)?;
            emit(&json, out)
        }
    }
}

/// With samples, the CSV goes to `out` and the model to `model_out`;
/// otherwise the model goes to `model_out` or `out`.
fn write_model_and_samples(
    model: &[u8],
    samples: Option<&SampleSet>,
    model_out: Option<&PathBuf>,
    out: Option<&Path>,
) -> Result<(), Failure> {
    match samples {
        Some(s) => {
            let mut csv = Vec::new();
            s.write_csv(&mut csv)?;
            if let Some(path) = model_out {
                emit(model, Some(path))?;
            }
            emit(&csv, out)
        }
        None => emit(model, model_out.map(|p| p.as_path()).or(out)),
    }
}

fn emit_report(report: &RecoveryReport, out: Option<&Path>) -> Result<(), Failure> {
    let mut buf = Vec::new();
    report.write(&mut buf)?;
    buf.push(b'\n');
    emit(&buf, out)
}

/// Writes a fully formed buffer, so failed runs never leave partial output.
fn emit(bytes: &[u8], out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Failure::io(format!("{}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::io(format!("stdout: {e}")))
        }
    }
}
