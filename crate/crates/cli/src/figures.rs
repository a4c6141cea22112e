//! Figure-ready outputs from solve directories: long-format CSVs for
//! suboptimality-vs-iteration, missed-detection-vs-time and per-bit-depth
//! comparisons, plus optional simple SVG line plots of the median curves.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use actdet_core::detect::pmd_series;
use actdet_core::model::{ActiveDevice, GroundTruth};
use actdet_core::Error;

use crate::runner::{read_aggregate, read_summary, read_trace, write_atomic, AggregateRow};
use crate::spec::ResolvedSpec;

const MAX_POINTS_PER_SERIES: usize = 512;

struct InputDir {
    label: String,
    path: PathBuf,
    rows: Vec<AggregateRow>,
    policies: Vec<String>,
    seeds: Vec<u64>,
}

fn load_input(path: &Path, used: &mut Vec<String>) -> Result<InputDir, Error> {
    let spec_text = fs::read_to_string(path.join("resolved_spec.toml"))?;
    let spec: ResolvedSpec = toml::from_str(&spec_text).map_err(|e| {
        Error::Serialization(format!("bad resolved spec in {}: {e}", path.display()))
    })?;
    let mut label = match &spec.adc {
        Some(adc) => format!("{}bit", adc.bits),
        None => "unquantized".to_string(),
    };
    if used.contains(&label) {
        label = format!("{label}-{}", used.len());
    }
    used.push(label.clone());
    let rows = read_aggregate(&path.join("aggregate.csv"))?;
    let mut policies: Vec<String> = rows.iter().map(|r| r.policy.clone()).collect();
    policies.sort();
    policies.dedup();
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    Ok(InputDir {
        label,
        path: path.to_path_buf(),
        rows,
        policies,
        seeds,
    })
}

/// `F*` per seed: the best final objective any policy reached, less a guard.
fn f_star_by_seed(rows: &[AggregateRow]) -> BTreeMap<u64, f64> {
    let mut best: BTreeMap<u64, f64> = BTreeMap::new();
    for r in rows {
        let entry = best.entry(r.seed).or_insert(f64::INFINITY);
        *entry = entry.min(r.final_f);
    }
    best.iter()
        .map(|(&seed, &f)| (seed, f - 1e-12 * f.abs().max(1.0)))
        .collect()
}

fn stride(len: usize) -> usize {
    len.div_ceil(MAX_POINTS_PER_SERIES).max(1)
}

fn truth_from_summary(s: &crate::runner::RunSummary) -> GroundTruth {
    let mut gamma = vec![0.0; s.num_devices * s.num_messages];
    for a in &s.truth_active {
        gamma[a.device * s.num_messages + a.message] = 1.0;
    }
    GroundTruth {
        active: s
            .truth_active
            .iter()
            .map(|a| ActiveDevice {
                device: a.device,
                message: a.message,
            })
            .collect(),
        gamma,
        pathloss: vec![1.0; s.num_devices],
    }
}

pub fn emit_figures(inputs: &[PathBuf], out: &Path, svg: bool) -> Result<(), Error> {
    if inputs.is_empty() {
        return Err(Error::Config(
            "figures needs at least one input directory".into(),
        ));
    }
    fs::create_dir_all(out)?;
    let mut used_labels = Vec::new();
    let dirs: Vec<InputDir> = inputs
        .iter()
        .map(|p| load_input(p, &mut used_labels))
        .collect::<Result<_, _>>()?;

    // Suboptimality vs iteration per policy (first input).
    let base = &dirs[0];
    let f_star = f_star_by_seed(&base.rows);
    let mut conv_policy = String::from("label,policy,seed,t,epsilon\n");
    let mut conv_policy_series: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for policy in &base.policies {
        for &seed in &base.seeds {
            let trace = read_trace(&base.path, policy, seed)?;
            let fs_ = f_star[&seed];
            let eps: Vec<f64> = trace
                .records
                .iter()
                .map(|r| (r.objective - fs_).max(0.0))
                .collect();
            let st = stride(eps.len());
            for (i, &e) in eps.iter().enumerate() {
                if i % st == 0 || i + 1 == eps.len() {
                    conv_policy.push_str(&format!(
                        "{},{},{},{},{}\n",
                        base.label,
                        policy,
                        seed,
                        i + 1,
                        e
                    ));
                }
            }
            conv_policy_series
                .entry(policy.clone())
                .or_default()
                .push(eps);
        }
    }
    write_atomic(
        &out.join("convergence_by_policy.csv"),
        conv_policy.as_bytes(),
    )?;

    // Missed detection vs wall time per policy (first input).
    let mut pmd_time = String::from("label,policy,seed,elapsed_s,p_md\n");
    let mut pmd_time_series: BTreeMap<String, Vec<Vec<(f64, f64)>>> = BTreeMap::new();
    for policy in &base.policies {
        for &seed in &base.seeds {
            let summary = read_summary(&base.path, policy, seed)?;
            let truth = truth_from_summary(&summary);
            let trace = read_trace(&base.path, policy, seed)?;
            let series = pmd_series(&truth, &trace);
            let st = stride(series.len());
            for (i, &(elapsed, pmd)) in series.iter().enumerate() {
                if i % st == 0 || i + 1 == series.len() {
                    pmd_time.push_str(&format!(
                        "{},{},{},{},{}\n",
                        base.label, policy, seed, elapsed, pmd
                    ));
                }
            }
            pmd_time_series
                .entry(policy.clone())
                .or_default()
                .push(series);
        }
    }
    write_atomic(&out.join("pmd_vs_time.csv"), pmd_time.as_bytes())?;

    // Suboptimality vs iteration per bit depth (all inputs).
    let mut conv_adc = String::from("label,policy,seed,t,epsilon\n");
    let mut conv_adc_series: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for dir in &dirs {
        let f_star = f_star_by_seed(&dir.rows);
        let policy = if dir.policies.iter().any(|p| p == "thompson") {
            "thompson".to_string()
        } else {
            dir.policies.first().cloned().unwrap_or_default()
        };
        for &seed in &dir.seeds {
            let trace = read_trace(&dir.path, &policy, seed)?;
            let fs_ = f_star[&seed];
            let eps: Vec<f64> = trace
                .records
                .iter()
                .map(|r| (r.objective - fs_).max(0.0))
                .collect();
            let st = stride(eps.len());
            for (i, &e) in eps.iter().enumerate() {
                if i % st == 0 || i + 1 == eps.len() {
                    conv_adc.push_str(&format!(
                        "{},{},{},{},{}\n",
                        dir.label,
                        policy,
                        seed,
                        i + 1,
                        e
                    ));
                }
            }
            conv_adc_series
                .entry(dir.label.clone())
                .or_default()
                .push(eps);
        }
    }
    write_atomic(&out.join("convergence_by_adc.csv"), conv_adc.as_bytes())?;

    // Final missed detection per bit depth and policy.
    let mut pmd_adc = String::from("label,policy,seed,p_md\n");
    let mut pmd_adc_medians: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for dir in &dirs {
        for policy in &dir.policies {
            let vals: Vec<f64> = dir
                .rows
                .iter()
                .filter(|r| &r.policy == policy)
                .map(|r| r.p_md)
                .collect();
            for r in dir.rows.iter().filter(|r| &r.policy == policy) {
                pmd_adc.push_str(&format!("{},{},{},{}\n", dir.label, policy, r.seed, r.p_md));
            }
            pmd_adc_medians
                .entry(policy.clone())
                .or_default()
                .push((dir.label.clone(), median(&vals)));
        }
    }
    write_atomic(&out.join("pmd_by_adc.csv"), pmd_adc.as_bytes())?;

    if svg {
        let conv_policy_med: Vec<Series> = conv_policy_series
            .into_iter()
            .map(|(policy, per_seed)| Series {
                name: policy,
                points: median_over_iterations(&per_seed),
            })
            .collect();
        write_svg(
            &out.join("convergence_by_policy.svg"),
            "Suboptimality vs iteration (median over seeds)",
            "iteration",
            "log10 suboptimality",
            &conv_policy_med,
            true,
        )?;

        let pmd_time_med: Vec<Series> = pmd_time_series
            .into_iter()
            .map(|(policy, per_seed)| Series {
                name: policy,
                points: median_over_time_grid(&per_seed, 200),
            })
            .collect();
        write_svg(
            &out.join("pmd_vs_time.svg"),
            "Missed detection vs solver time (median over seeds)",
            "seconds",
            "P_md",
            &pmd_time_med,
            false,
        )?;

        let conv_adc_med: Vec<Series> = conv_adc_series
            .into_iter()
            .map(|(label, per_seed)| Series {
                name: label,
                points: median_over_iterations(&per_seed),
            })
            .collect();
        write_svg(
            &out.join("convergence_by_adc.svg"),
            "Suboptimality vs iteration per ADC depth (median over seeds)",
            "iteration",
            "log10 suboptimality",
            &conv_adc_med,
            true,
        )?;

        let pmd_adc_med: Vec<Series> = pmd_adc_medians
            .into_iter()
            .map(|(policy, labelled)| Series {
                name: policy,
                points: labelled
                    .iter()
                    .enumerate()
                    .map(|(i, (_, v))| (i as f64, *v))
                    .collect(),
            })
            .collect();
        write_svg(
            &out.join("pmd_by_adc.svg"),
            "Median missed detection per input (index order)",
            "input index",
            "P_md",
            &pmd_adc_med,
            false,
        )?;
    }
    Ok(())
}

fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median across seeds at each iteration; shorter series extend with their
/// final value.
fn median_over_iterations(per_seed: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let max_len = per_seed.iter().map(|s| s.len()).max().unwrap_or(0);
    let st = stride(max_len);
    let mut points = Vec::new();
    let mut t = 0;
    while t < max_len {
        let vals: Vec<f64> = per_seed
            .iter()
            .filter_map(|s| s.get(t).or(s.last()).copied())
            .collect();
        points.push(((t + 1) as f64, median(&vals)));
        t += st;
    }
    points
}

/// Median across seeds of step functions sampled on a common time grid.
fn median_over_time_grid(per_seed: &[Vec<(f64, f64)>], grid: usize) -> Vec<(f64, f64)> {
    let t_max = per_seed
        .iter()
        .filter_map(|s| s.last().map(|&(t, _)| t))
        .fold(0.0f64, f64::max);
    if t_max <= 0.0 {
        return Vec::new();
    }
    (0..=grid)
        .map(|i| {
            let t = t_max * i as f64 / grid as f64;
            let vals: Vec<f64> = per_seed
                .iter()
                .map(|s| {
                    // Value of the step function at time t (last point ≤ t).
                    let mut v = s.first().map(|&(_, p)| p).unwrap_or(f64::NAN);
                    for &(ts, p) in s {
                        if ts <= t {
                            v = p;
                        } else {
                            break;
                        }
                    }
                    v
                })
                .collect();
            (t, median(&vals))
        })
        .collect()
}

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
}

const SVG_PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

/// Minimal line plot: axes, ticks, one polyline per series, legend.
fn write_svg(
    path: &Path,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[Series],
    logy: bool,
) -> Result<(), Error> {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const ML: f64 = 70.0;
    const MR: f64 = 20.0;
    const MT: f64 = 40.0;
    const MB: f64 = 55.0;

    let transform = |y: f64| -> f64 {
        if logy {
            y.max(1e-300).log10()
        } else {
            y
        }
    };
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for s in series {
        for &(x, y) in &s.points {
            let ty = transform(y);
            if !ty.is_finite() {
                continue;
            }
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(ty);
            ymax = ymax.max(ty);
        }
    }
    if !xmin.is_finite() {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if xmax - xmin < 1e-12 {
        xmax = xmin + 1.0;
    }
    if ymax - ymin < 1e-12 {
        ymax = ymin + 1.0;
        ymin -= 1.0;
    }
    let px = |x: f64| ML + (x - xmin) / (xmax - xmin) * (W - ML - MR);
    let py = |y: f64| H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        title
    ));
    // Axes.
    svg.push_str(&format!(
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
        W - ML - MR,
        H - MT - MB
    ));
    for i in 0..=5 {
        let fx = xmin + (xmax - xmin) * i as f64 / 5.0;
        let fy = ymin + (ymax - ymin) * i as f64 / 5.0;
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"#ccc\"/>\n\
             <text x=\"{0}\" y=\"{3}\" text-anchor=\"middle\">{4:.3}</text>\n",
            px(fx),
            MT,
            H - MB,
            H - MB + 18.0,
            fx
        ));
        svg.push_str(&format!(
            "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#ccc\"/>\n\
             <text x=\"{2}\" y=\"{3}\" text-anchor=\"end\">{4:.3}</text>\n",
            py(fy),
            W - MR,
            ML - 6.0,
            py(fy) + 4.0,
            fy
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        H - 12.0,
        xlabel
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        H / 2.0,
        H / 2.0,
        ylabel
    ));
    for (i, s) in series.iter().enumerate() {
        let color = SVG_PALETTE[i % SVG_PALETTE.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|&&(_, y)| transform(y).is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(transform(y))))
            .collect();
        if !pts.is_empty() {
            svg.push_str(&format!(
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.7\" points=\"{}\"/>\n",
                pts.join(" ")
            ));
        }
        let ly = MT + 16.0 + 16.0 * i as f64;
        svg.push_str(&format!(
            "<line x1=\"{0}\" y1=\"{ly}\" x2=\"{1}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{2}\" y=\"{3}\">{4}</text>\n",
            W - MR - 150.0,
            W - MR - 120.0,
            W - MR - 112.0,
            ly + 4.0,
            s.name
        ));
    }
    svg.push_str("</svg>\n");
    write_atomic(path, svg.as_bytes())?;
    Ok(())
}
