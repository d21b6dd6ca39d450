//! End-to-end inference: audio in, denormalized trajectories out, with
//! optional CSV and SVG trajectory-overlay emission.

use std::path::Path;

use crate::data::denormalize_targets;
use crate::dsp::{self, FeatureKind, FeatureMatrix};
use crate::error::{Result, SiError};
use crate::nn::{Mode, TargetStat, TcnModel, Tensor};
use crate::tv::TrajectorySet;

/// Input representation implied by the checkpoint's input channel count.
pub fn kind_for_channels(in_channels: usize) -> Result<FeatureKind> {
    match in_channels {
        c if c == dsp::AUDSPEC_CHANNELS => Ok(FeatureKind::Audspec),
        c if c == dsp::MEL_CHANNELS => Ok(FeatureKind::Mspec),
        c => Err(SiError::Data(format!("checkpoint has unrecognized input width {c}"))),
    }
}

/// Run the full pipeline on one wave: resample to 16 kHz, segment,
/// featurize, normalize, batch all segments through the model in eval
/// mode, stitch the unpadded frames back together, and denormalize.
pub fn infer(
    model: &mut TcnModel<f32>,
    stats: &[TargetStat],
    wave: &crate::dsp::WaveBuffer,
) -> Result<TrajectorySet> {
    if stats.len() != model.config.n_targets {
        return Err(SiError::Data(format!(
            "checkpoint stats cover {} variables but the model has {} targets",
            stats.len(),
            model.config.n_targets
        )));
    }
    let kind = kind_for_channels(model.config.in_channels)?;
    let feats = crate::data::featurize_wave(wave, "infer", kind)?;
    let per_seg = match kind {
        FeatureKind::Audspec => dsp::AUDSPEC_FRAMES,
        _ => dsp::MSPEC_FRAMES,
    };
    let n_seg = feats.frames / per_seg;
    let c_in = feats.channels;

    let mut input = Tensor::zeros(&[n_seg, c_in, per_seg]);
    for s in 0..n_seg {
        for f in 0..per_seg {
            let frame = feats.frame(s * per_seg + f);
            for (c, &v) in frame.iter().enumerate() {
                input.data[(s * c_in + c) * per_seg + f] = v;
            }
        }
    }
    let pred = model.forward(&input, Mode::Eval)?;

    // Valid target frames: ceil of the 16 kHz sample count over the 160-
    // sample target hop; trailing segment padding is trimmed.
    let wave16 = dsp::resample(wave, dsp::TARGET_SAMPLE_RATE)?;
    let hop = dsp::TARGET_SAMPLE_RATE as usize / dsp::TARGET_FRAME_RATE as usize;
    let total_frames = wave16.samples.len().div_ceil(hop);
    let t_out = dsp::SEGMENT_TARGET_FRAMES;
    let n_t = model.config.n_targets;

    let mut normed = FeatureMatrix::zeros(
        total_frames,
        n_t,
        dsp::TARGET_FRAME_RATE as f64,
        FeatureKind::Targets,
    );
    for s in 0..n_seg {
        let valid = (total_frames - s * t_out).min(t_out);
        for v in 0..n_t {
            let base = (s * n_t + v) * t_out;
            for f in 0..valid {
                *normed.at_mut(s * t_out + f, v) = pred.data[base + f];
            }
        }
    }
    let denormed = denormalize_targets(&normed, stats)?;
    Ok(TrajectorySet {
        names: stats.iter().map(|s| s.name.clone()).collect(),
        tracks: (0..n_t).map(|v| denormed.channel(v)).collect(),
        frame_rate: dsp::TARGET_FRAME_RATE as f64,
        valid_frames: total_frames,
    })
}

/// Write trajectories as CSV: `time,<var1>,<var2>,...`, one row per frame.
pub fn write_trajectory_csv(path: &Path, traj: &TrajectorySet) -> Result<()> {
    let mut out = String::from("time");
    for name in &traj.names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for f in 0..traj.len() {
        out.push_str(&format!("{}", f as f64 / traj.frame_rate));
        for track in &traj.tracks {
            out.push_str(&format!(",{}", track[f]));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

const SVG_WIDTH: f64 = 860.0;
const PANEL_HEIGHT: f64 = 120.0;
const MARGIN: f64 = 40.0;

fn polyline(points: &[(f64, f64)], style: &str) -> String {
    let coords: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    format!("<polyline fill=\"none\" {style} points=\"{}\"/>\n", coords.join(" "))
}

/// One panel per variable: ground truth as a solid line, prediction dashed,
/// both on a shared per-panel vertical scale.
pub fn write_trajectory_svg(
    path: &Path,
    predicted: &TrajectorySet,
    truth: Option<&TrajectorySet>,
) -> Result<()> {
    let n_vars = predicted.names.len();
    let height = n_vars as f64 * PANEL_HEIGHT + MARGIN;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH}\" height=\"{height}\" \
         font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    for (v, name) in predicted.names.iter().enumerate() {
        let top = v as f64 * PANEL_HEIGHT + 20.0;
        let plot_h = PANEL_HEIGHT - 35.0;
        let pred_track = &predicted.tracks[v];
        let truth_track = truth.and_then(|t| t.track(name));
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &x in pred_track.iter().chain(truth_track.unwrap_or(&[])) {
            lo = lo.min(x as f64);
            hi = hi.max(x as f64);
        }
        if !(hi > lo) {
            hi = lo + 1.0;
        }
        let n = pred_track.len().max(2);
        let to_xy = |f: usize, value: f32| {
            let x = MARGIN + f as f64 / (n - 1) as f64 * (SVG_WIDTH - 2.0 * MARGIN);
            let y = top + plot_h - (value as f64 - lo) / (hi - lo) * plot_h;
            (x, y)
        };
        svg.push_str(&format!(
            "<text x=\"{MARGIN}\" y=\"{}\">{name}</text>\n",
            top - 6.0
        ));
        if let Some(track) = truth_track {
            let pts: Vec<(f64, f64)> =
                track.iter().enumerate().map(|(f, &val)| to_xy(f, val)).collect();
            svg.push_str(&polyline(&pts, "stroke=\"#1f77b4\" stroke-width=\"1.5\""));
        }
        let pts: Vec<(f64, f64)> =
            pred_track.iter().enumerate().map(|(f, &val)| to_xy(f, val)).collect();
        svg.push_str(&polyline(
            &pts,
            "stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"5,3\"",
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_mapping() {
        assert_eq!(kind_for_channels(128).unwrap(), FeatureKind::Audspec);
        assert_eq!(kind_for_channels(40).unwrap(), FeatureKind::Mspec);
        assert!(kind_for_channels(64).is_err());
    }

    #[test]
    fn svg_has_one_panel_per_variable_with_two_polylines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.svg");
        let traj = TrajectorySet {
            names: vec!["LA".into(), "TTCD".into()],
            tracks: vec![vec![1.0, 2.0, 3.0], vec![0.5, 0.4, 0.6]],
            frame_rate: 100.0,
            valid_frames: 3,
        };
        write_trajectory_svg(&path, &traj, Some(&traj)).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert_eq!(svg.matches("<text").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
        // Without truth: one polyline per panel.
        write_trajectory_svg(&path, &traj, None).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
    }

    #[test]
    fn csv_rows_match_frames() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let traj = TrajectorySet {
            names: vec!["LA".into()],
            tracks: vec![vec![1.25, -0.5]],
            frame_rate: 100.0,
            valid_frames: 2,
        };
        write_trajectory_csv(&path, &traj).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "time,LA");
        assert_eq!(lines[1], "0,1.25");
        assert_eq!(lines[2], "0.01,-0.5");
    }
}
