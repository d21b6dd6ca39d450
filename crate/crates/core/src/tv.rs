//! Tract-variable geometry: pellet/sensor coordinates to constriction
//! trajectories.
//!
//! Constriction degrees are point-to-palate distances, constriction
//! locations are arc-length coordinates along the palate trace (mm from the
//! alveolar end), lip aperture is the inter-lip distance, lip protrusion is
//! measured against the palate-frame origin (the first palate point), and
//! jaw angle comes from the incisor pair. Two schemes: the 6-TV X-ray
//! microbeam set and the 9-TV EMA set.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Result, SiError};

/// Midsagittal point in mm: x anterior-positive, y superior-positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// One articulometry frame: named pellet/sensor positions at a timestamp.
#[derive(Debug, Clone)]
pub struct PelletFrame {
    pub timestamp: f64,
    pub points: BTreeMap<String, Point>,
}

/// Palate reference trace, ordered anterior (alveolar) to posterior (velar),
/// with strictly monotone x along the trace.
#[derive(Debug, Clone)]
pub struct PalateTrace {
    points: Vec<Point>,
    /// Cumulative arc length at each vertex, mm.
    arc: Vec<f64>,
}

impl PalateTrace {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 8 {
            return Err(SiError::Data(format!(
                "palate trace needs at least 8 points, got {}",
                points.len()
            )));
        }
        let ascending = points.windows(2).all(|w| w[1].x > w[0].x);
        let descending = points.windows(2).all(|w| w[1].x < w[0].x);
        if !ascending && !descending {
            return Err(SiError::Data("palate trace x must be strictly monotone".into()));
        }
        let mut arc = Vec::with_capacity(points.len());
        let mut total = 0.0;
        arc.push(0.0);
        for w in points.windows(2) {
            total += w[0].distance(w[1]);
            arc.push(total);
        }
        Ok(PalateTrace { points, arc })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Anterior (alveolar) end; also the palate-frame origin for LP.
    pub fn origin(&self) -> Point {
        self.points[0]
    }

    pub fn total_arc_length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> PalateTrace {
        PalateTrace {
            points: self.points.iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect(),
            arc: self.arc.clone(),
        }
    }
}

/// Which TV set to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TvScheme {
    Xrmb6,
    Hprc9,
}

impl TvScheme {
    pub fn tv_names(self) -> &'static [&'static str] {
        match self {
            TvScheme::Xrmb6 => &["LA", "LP", "TBCL", "TBCD", "TTCL", "TTCD"],
            TvScheme::Hprc9 => &["LA", "LP", "TBCL", "TBCD", "TTCL", "TTCD", "JA", "TMCL", "TMCD"],
        }
    }

    fn required_pellets(self) -> &'static [&'static str] {
        match self {
            TvScheme::Xrmb6 => &["UL", "LL", "T1", "T3"],
            TvScheme::Hprc9 => &["UL", "LL", "TT", "TB", "LI", "UI"],
        }
    }

    fn tongue_tip(self) -> &'static str {
        match self {
            TvScheme::Xrmb6 => "T1",
            TvScheme::Hprc9 => "TT",
        }
    }

    fn tongue_body(self) -> &'static str {
        match self {
            TvScheme::Xrmb6 => "T3",
            TvScheme::Hprc9 => "TB",
        }
    }
}

/// Named articulatory tracks on a common time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub names: Vec<String>,
    /// One track per name, all equal length.
    pub tracks: Vec<Vec<f32>>,
    pub frame_rate: f64,
    pub valid_frames: usize,
}

impl TrajectorySet {
    pub fn len(&self) -> usize {
        self.tracks.first().map_or(0, |t| t.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn track(&self, name: &str) -> Option<&[f32]> {
        self.names.iter().position(|n| n == name).map(|i| self.tracks[i].as_slice())
    }
}

/// Minimum distance from a point to the palate polyline, plus the arc-length
/// coordinate of the projection. Ties break toward the smaller arc position.
pub fn point_to_polyline(p: Point, poly: &PalateTrace) -> (f64, f64) {
    let pts = poly.points();
    let mut best = (f64::INFINITY, 0.0f64);
    for (i, seg) in pts.windows(2).enumerate() {
        let (a, b) = (seg[0], seg[1]);
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let proj = Point::new(a.x + t * dx, a.y + t * dy);
        let d = p.distance(proj);
        if d < best.0 {
            best = (d, poly.arc[i] + t * len2.sqrt());
        }
    }
    best
}

/// Compute tract variables for every frame.
pub fn compute_tvs(
    frames: &[PelletFrame],
    palate: &PalateTrace,
    scheme: TvScheme,
) -> Result<TrajectorySet> {
    if frames.is_empty() {
        return Err(SiError::Data("compute_tvs: no pellet frames".into()));
    }
    let names: Vec<String> = scheme.tv_names().iter().map(|s| s.to_string()).collect();
    let mut tracks = vec![Vec::with_capacity(frames.len()); names.len()];
    // Native frame rate from timestamps; resampling to 100 Hz happens later.
    let frame_rate = if frames.len() >= 2 {
        let span = frames.last().unwrap().timestamp - frames[0].timestamp;
        if span > 0.0 { (frames.len() - 1) as f64 / span } else { 100.0 }
    } else {
        100.0
    };

    for (idx, frame) in frames.iter().enumerate() {
        let get = |name: &str| -> Result<Point> {
            frame.points.get(name).copied().ok_or_else(|| {
                SiError::Data(format!("frame {idx}: missing pellet '{name}' for {scheme:?}"))
            })
        };
        for name in scheme.required_pellets() {
            get(name)?;
        }
        let ul = get("UL")?;
        let ll = get("LL")?;
        let tip = get(scheme.tongue_tip())?;
        let body = get(scheme.tongue_body())?;

        let la = ul.distance(ll);
        let lp = ul.x - palate.origin().x;
        let (ttcd, ttcl) = point_to_polyline(tip, palate);
        let (tbcd, tbcl) = point_to_polyline(body, palate);

        let mut values = vec![la, lp, tbcl, tbcd, ttcl, ttcd];
        if scheme == TvScheme::Hprc9 {
            let li = get("LI")?;
            let ui = get("UI")?;
            let ja = (li.y - ui.y).atan2(li.x - ui.x);
            let mid = Point::new((tip.x + body.x) / 2.0, (tip.y + body.y) / 2.0);
            let (tmcd, tmcl) = point_to_polyline(mid, palate);
            values.extend_from_slice(&[ja, tmcl, tmcd]);
        }
        for (track, v) in tracks.iter_mut().zip(&values) {
            if !v.is_finite() {
                return Err(SiError::Numeric(format!("frame {idx}: non-finite TV value")));
            }
            track.push(*v as f32);
        }
    }
    let n = frames.len();
    Ok(TrajectorySet { names, tracks, frame_rate, valid_frames: n })
}

/// Linearly resample every track onto a uniform grid at `target_rate`,
/// holding endpoints. Needs at least two frames.
pub fn resample_trajectories(t: &TrajectorySet, target_rate: f64) -> Result<TrajectorySet> {
    if t.len() < 2 {
        return Err(SiError::Data("resample_trajectories: fewer than 2 frames".into()));
    }
    if t.frame_rate <= 0.0 || target_rate <= 0.0 {
        return Err(SiError::Config("resample_trajectories: rates must be positive".into()));
    }
    let span = (t.len() - 1) as f64 / t.frame_rate;
    let n_out = (span * target_rate + 1e-9).floor() as usize + 1;
    let mut out_tracks = Vec::with_capacity(t.tracks.len());
    for track in &t.tracks {
        let mut out = Vec::with_capacity(n_out);
        for i in 0..n_out {
            let pos = i as f64 / target_rate * t.frame_rate;
            let i0 = pos.floor() as usize;
            if i0 + 1 >= track.len() {
                out.push(*track.last().unwrap());
            } else {
                let frac = pos - i0 as f64;
                out.push((track[i0] as f64 * (1.0 - frac) + track[i0 + 1] as f64 * frac) as f32);
            }
        }
        out_tracks.push(out);
    }
    Ok(TrajectorySet {
        names: t.names.clone(),
        tracks: out_tracks,
        frame_rate: target_rate,
        valid_frames: n_out,
    })
}

/// Load pellet frames from a CSV with header `time,name,x,y` (seconds, mm).
/// Pellets missing for gaps of at most 50 ms are linearly interpolated;
/// longer gaps reject the utterance, mirroring mistracked-sample handling.
pub fn load_pellet_csv(path: &Path, scheme: TvScheme) -> Result<Vec<PelletFrame>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: BTreeMap<(u64, String), Point> = BTreeMap::new();
    let mut times: Vec<f64> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("time")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if fields.len() != 4 {
            return Err(SiError::Data(format!(
                "{}:{}: expected time,name,x,y",
                path.display(),
                lineno + 1
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| {
                SiError::Data(format!("{}:{}: bad number '{s}'", path.display(), lineno + 1))
            })
        };
        let time = parse(fields[0])?;
        let (x, y) = (parse(fields[2])?, parse(fields[3])?);
        let key_time = (time * 1e6).round() as u64;
        if times.last() != Some(&time) && !times.contains(&time) {
            times.push(time);
        }
        if x.is_finite() && y.is_finite() && x.abs() < 200.0 && y.abs() < 200.0 {
            rows.insert((key_time, fields[1].to_string()), Point::new(x, y));
        }
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if times.is_empty() {
        return Err(SiError::Data(format!("{}: no pellet rows", path.display())));
    }

    // Assemble frames; track gaps per pellet for interpolation.
    let needed: Vec<&str> = scheme.required_pellets().to_vec();
    let mut frames: Vec<PelletFrame> = times
        .iter()
        .map(|&t| PelletFrame { timestamp: t, points: BTreeMap::new() })
        .collect();
    for name in &needed {
        let series: Vec<Option<Point>> = times
            .iter()
            .map(|&t| rows.get(&((t * 1e6).round() as u64, name.to_string())).copied())
            .collect();
        let filled = fill_gaps(&series, &times, 0.050)
            .map_err(|gap| SiError::Data(format!(
                "{}: pellet '{name}' missing for {gap:.0} ms, utterance dropped",
                path.display()
            )))?;
        for (frame, p) in frames.iter_mut().zip(filled) {
            frame.points.insert(name.to_string(), p);
        }
    }
    Ok(frames)
}

/// Interpolate gaps up to `max_gap` seconds; longer gaps (or missing
/// endpoints beyond the gap budget) are an error carrying the gap in ms.
fn fill_gaps(
    series: &[Option<Point>],
    times: &[f64],
    max_gap: f64,
) -> std::result::Result<Vec<Point>, f64> {
    let known: Vec<usize> =
        series.iter().enumerate().filter_map(|(i, p)| p.map(|_| i)).collect();
    if known.is_empty() {
        return Err((times[times.len() - 1] - times[0]) * 1000.0);
    }
    let mut out = Vec::with_capacity(series.len());
    for i in 0..series.len() {
        if let Some(p) = series[i] {
            out.push(p);
            continue;
        }
        let before = known.iter().rev().find(|&&k| k < i).copied();
        let after = known.iter().find(|&&k| k > i).copied();
        match (before, after) {
            (Some(b), Some(a)) => {
                let gap = times[a] - times[b];
                if gap > max_gap {
                    return Err(gap * 1000.0);
                }
                let frac = (times[i] - times[b]) / gap;
                let (pb, pa) = (series[b].unwrap(), series[a].unwrap());
                out.push(Point::new(
                    pb.x + frac * (pa.x - pb.x),
                    pb.y + frac * (pa.y - pb.y),
                ));
            }
            (Some(b), None) => {
                let gap = times[i] - times[b];
                if gap > max_gap {
                    return Err(gap * 1000.0);
                }
                out.push(series[b].unwrap());
            }
            (None, Some(a)) => {
                let gap = times[a] - times[i];
                if gap > max_gap {
                    return Err(gap * 1000.0);
                }
                out.push(series[a].unwrap());
            }
            (None, None) => unreachable!(),
        }
    }
    Ok(out)
}

/// Load a palate trace from a CSV of `x,y` rows ordered anterior->posterior.
pub fn load_palate_csv(path: &Path) -> Result<PalateTrace> {
    let text = std::fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with(|c: char| c.is_alphabetic())) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if fields.len() != 2 {
            return Err(SiError::Data(format!("{}:{}: expected x,y", path.display(), lineno + 1)));
        }
        let x = fields[0].parse::<f64>();
        let y = fields[1].parse::<f64>();
        match (x, y) {
            (Ok(x), Ok(y)) => points.push(Point::new(x, y)),
            _ => {
                return Err(SiError::Data(format!(
                    "{}:{}: bad palate row",
                    path.display(),
                    lineno + 1
                )))
            }
        }
    }
    PalateTrace::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_palate() -> PalateTrace {
        // 9 points from x=0 (alveolar) to x=-16, arched slightly.
        let points = (0..9)
            .map(|i| Point::new(-(i as f64) * 2.0, 10.0 + (i as f64 - 4.0).powi(2) * 0.05))
            .collect();
        PalateTrace::new(points).unwrap()
    }

    fn frame(points: &[(&str, f64, f64)]) -> PelletFrame {
        PelletFrame {
            timestamp: 0.0,
            points: points
                .iter()
                .map(|(n, x, y)| (n.to_string(), Point::new(*x, *y)))
                .collect(),
        }
    }

    #[test]
    fn la_is_euclidean_lip_distance() {
        let f = frame(&[("UL", 0.0, 12.0), ("LL", 0.0, 4.0), ("T1", -4.0, 6.0), ("T3", -10.0, 6.0)]);
        let tvs = compute_tvs(&[f], &flat_palate(), TvScheme::Xrmb6).unwrap();
        assert_eq!(tvs.track("LA").unwrap()[0], 8.0);
    }

    #[test]
    fn la_is_symmetric_in_lips() {
        let a = frame(&[("UL", 1.0, 12.0), ("LL", -2.0, 3.0), ("T1", -4.0, 6.0), ("T3", -10.0, 6.0)]);
        let b = frame(&[("UL", -2.0, 3.0), ("LL", 1.0, 12.0), ("T1", -4.0, 6.0), ("T3", -10.0, 6.0)]);
        let palate = flat_palate();
        let ta = compute_tvs(&[a], &palate, TvScheme::Xrmb6).unwrap();
        let tb = compute_tvs(&[b], &palate, TvScheme::Xrmb6).unwrap();
        assert_eq!(ta.track("LA").unwrap()[0], tb.track("LA").unwrap()[0]);
    }

    #[test]
    fn tip_on_palate_vertex_gives_zero_ttcd() {
        let palate = flat_palate();
        let vertex = palate.points()[3];
        let f = frame(&[
            ("UL", 0.0, 12.0),
            ("LL", 0.0, 4.0),
            ("T1", vertex.x, vertex.y),
            ("T3", -10.0, 6.0),
        ]);
        let tvs = compute_tvs(&[f], &palate, TvScheme::Xrmb6).unwrap();
        assert!(tvs.track("TTCD").unwrap()[0].abs() < 1e-9);
        let arc3 = palate.arc[3];
        assert!((tvs.track("TTCL").unwrap()[0] as f64 - arc3).abs() < 1e-6);
    }

    #[test]
    fn point_to_polyline_hand_cases() {
        let poly = PalateTrace::new(
            (0..9).map(|i| Point::new(i as f64 * 0.25, 0.0)).collect(),
        )
        .unwrap(); // straight segment [(0,0) .. (2,0)]
        let (d, arc) = point_to_polyline(Point::new(1.0, 1.0), &poly);
        assert!((d - 1.0).abs() < 1e-12);
        assert!((arc - 1.0).abs() < 1e-12);
        let (d, arc) = point_to_polyline(Point::new(0.0, 0.0), &poly);
        assert_eq!((d, arc), (0.0, 0.0));
        let (d, arc) = point_to_polyline(Point::new(3.0, 1.0), &poly);
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        assert!((arc - 2.0).abs() < 1e-12, "arc clamps to the endpoint");
    }

    #[test]
    fn common_translation_leaves_all_tvs_unchanged() {
        let base = frame(&[
            ("UL", 0.5, 11.0),
            ("LL", 0.2, 4.0),
            ("T1", -3.0, 8.5),
            ("T3", -9.0, 8.0),
            ("TT", -3.0, 8.5),
            ("TB", -9.0, 8.0),
            ("LI", 0.3, 2.0),
            ("UI", 0.4, 12.0),
        ]);
        let (dx, dy) = (5.0, 3.0);
        let shifted = PelletFrame {
            timestamp: 0.0,
            points: base
                .points
                .iter()
                .map(|(n, p)| (n.clone(), Point::new(p.x + dx, p.y + dy)))
                .collect(),
        };
        let palate = flat_palate();
        for scheme in [TvScheme::Xrmb6, TvScheme::Hprc9] {
            let a = compute_tvs(&[base.clone()], &palate, scheme).unwrap();
            let b = compute_tvs(&[shifted.clone()], &palate.translated(dx, dy), scheme).unwrap();
            for (ta, tb) in a.tracks.iter().zip(&b.tracks) {
                assert!((ta[0] as f64 - tb[0] as f64).abs() < 1e-9, "{scheme:?}");
            }
        }
    }

    #[test]
    fn ttcd_is_lipschitz_in_tip_movement() {
        use rand::{Rng, SeedableRng};
        let palate = flat_palate();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut tip = Point::new(-4.0, 7.0);
        let (mut d_prev, _) = point_to_polyline(tip, &palate);
        for _ in 0..1000 {
            let step = Point::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
            let next = Point::new(tip.x + step.x, tip.y + step.y);
            let (d, _) = point_to_polyline(next, &palate);
            let moved = tip.distance(next);
            assert!((d - d_prev).abs() <= moved + 1e-12);
            tip = next;
            d_prev = d;
        }
    }

    #[test]
    fn missing_pellet_is_an_error() {
        let f = frame(&[("UL", 0.0, 12.0), ("LL", 0.0, 4.0), ("T1", -4.0, 6.0)]);
        assert!(compute_tvs(&[f], &flat_palate(), TvScheme::Xrmb6).is_err());
    }

    #[test]
    fn degenerate_palate_is_rejected() {
        assert!(PalateTrace::new(vec![Point::new(0.0, 0.0); 10]).is_err());
        assert!(PalateTrace::new((0..4).map(|i| Point::new(i as f64, 0.0)).collect()).is_err());
    }

    #[test]
    fn resample_identity_grid() {
        let t = TrajectorySet {
            names: vec!["LA".into()],
            tracks: vec![vec![1.0, 2.0, 3.0]],
            frame_rate: 100.0,
            valid_frames: 3,
        };
        let out = resample_trajectories(&t, 100.0).unwrap();
        assert_eq!(out.tracks[0], vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn resample_50_to_100_hz_linear_midpoints() {
        let t = TrajectorySet {
            names: vec!["LA".into()],
            tracks: vec![vec![0.0, 10.0]],
            frame_rate: 50.0,
            valid_frames: 2,
        };
        let out = resample_trajectories(&t, 100.0).unwrap();
        assert_eq!(out.tracks[0], vec![0.0, 5.0, 10.0]);
    }

    #[test]
    fn resample_constant_stays_constant() {
        let t = TrajectorySet {
            names: vec!["LA".into()],
            tracks: vec![vec![4.2; 17]],
            frame_rate: 73.0,
            valid_frames: 17,
        };
        let out = resample_trajectories(&t, 100.0).unwrap();
        assert!(out.tracks[0].iter().all(|&v| (v - 4.2).abs() < 1e-6));
    }

    #[test]
    fn resample_needs_two_frames() {
        let t = TrajectorySet {
            names: vec!["LA".into()],
            tracks: vec![vec![1.0]],
            frame_rate: 100.0,
            valid_frames: 1,
        };
        assert!(resample_trajectories(&t, 100.0).is_err());
    }

    #[test]
    fn pellet_csv_interpolates_short_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pellets.csv");
        let mut csv = String::from("time,name,x,y\n");
        for i in 0..10 {
            let t = i as f64 * 0.01;
            csv.push_str(&format!("{t},UL,0.0,12.0\n"));
            csv.push_str(&format!("{t},LL,0.0,4.0\n"));
            csv.push_str(&format!("{t},T3,-9.0,8.0\n"));
            if i != 4 {
                // 20 ms gap in T1 at frame 4: within the 50 ms budget.
                csv.push_str(&format!("{t},T1,{},8.5\n", -3.0 - i as f64 * 0.1));
            }
        }
        std::fs::write(&path, &csv).unwrap();
        let frames = load_pellet_csv(&path, TvScheme::Xrmb6).unwrap();
        assert_eq!(frames.len(), 10);
        let t1 = frames[4].points["T1"];
        assert!((t1.x - (-3.4)).abs() < 1e-9, "interpolated x {}", t1.x);
    }

    #[test]
    fn pellet_csv_rejects_long_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pellets.csv");
        let mut csv = String::from("time,name,x,y\n");
        for i in 0..20 {
            let t = i as f64 * 0.01;
            csv.push_str(&format!("{t},UL,0.0,12.0\n"));
            csv.push_str(&format!("{t},LL,0.0,4.0\n"));
            csv.push_str(&format!("{t},T3,-9.0,8.0\n"));
            if !(5..15).contains(&i) {
                // 100 ms hole in T1.
                csv.push_str(&format!("{t},T1,-3.0,8.5\n"));
            }
        }
        std::fs::write(&path, &csv).unwrap();
        assert!(load_pellet_csv(&path, TvScheme::Xrmb6).is_err());
    }
}
