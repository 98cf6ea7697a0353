//! Decision boundaries as marching-squares polylines.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{ClassificationRule, LossWeights, PrevalenceInterval, RuleKind};
use crate::error::{Error, Result};
use crate::geometry::LogPoint;

pub const MIN_CONTOUR_RESOLUTION: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourLevel {
    /// Edge of the binary positive region.
    Binary,
    /// Edge of the ternary positive region.
    TernaryPositive,
    /// Edge of the ternary negative region.
    TernaryNegative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub level: ContourLevel,
    pub points: Vec<LogPoint>,
    /// Closed loops repeat their first point at the end.
    pub closed: bool,
}

/// Zero level sets of the rule's decision functions, traced on a uniform
/// `resolution x resolution` node grid spanning the domain.
///
/// Each returned polyline separates nodes on either side of one decision
/// boundary. A rule with no boundary yields an empty list.
pub fn boundary_contour(rule: &ClassificationRule, resolution: usize) -> Result<Vec<Polyline>> {
    if resolution < MIN_CONTOUR_RESOLUTION {
        return Err(Error::InvalidParameter(format!(
            "contour resolution must be >= {MIN_CONTOUR_RESOLUTION}, got {resolution}"
        )));
    }
    let d = rule.domain();
    let n = resolution;
    let h = d.width() / (n - 1) as f64;
    let coord = |i: usize| if i == n - 1 { d.hi } else { d.lo + i as f64 * h };
    let mut pv = Vec::with_capacity(n * n);
    let mut nv = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let r = LogPoint::new(coord(i), coord(j));
            pv.push(rule.pos().density(r));
            nv.push(rule.neg().density(r));
        }
    }
    let LossWeights { w_fp, w_fn } = rule.weights();
    type Level = Box<dyn Fn(f64, f64) -> f64>;
    let levels: Vec<(ContourLevel, Level)> = match rule.kind() {
        RuleKind::Binary { p } => {
            vec![(ContourLevel::Binary, Box::new(move |a, b| w_fn * p * a - w_fp * (1.0 - p) * b))]
        }
        RuleKind::Ternary(PrevalenceInterval { p_lo, p_hi }) => vec![
            (ContourLevel::TernaryPositive, Box::new(move |a, b| p_lo * a - w_fp * (1.0 - p_lo) * b)),
            (ContourLevel::TernaryNegative, Box::new(move |a, b| w_fn * p_hi * a - (1.0 - p_hi) * b)),
        ],
    };
    let mut out = Vec::new();
    for (level, f) in levels {
        let values: Vec<f64> = pv.iter().zip(&nv).map(|(&a, &b)| f(a, b)).collect();
        let exact = |r: LogPoint| f(rule.pos().density(r), rule.neg().density(r));
        for (points, closed) in march(&values, n, &coord, Some(&exact)) {
            out.push(Polyline { level, points, closed });
        }
    }
    Ok(out)
}

/// Edge keys: `2 (i n + j)` for the edge from node `(i, j)` to `(i + 1, j)`,
/// `2 (i n + j) + 1` for the edge to `(i, j + 1)`.
///
/// Crossings are linear interpolants of the node values, or, given `exact`,
/// the inside end of a bisection bracket of `exact` along the edge, so they
/// always satisfy `exact > 0`.
fn march(
    values: &[f64],
    n: usize,
    coord: &dyn Fn(usize) -> f64,
    exact: Option<&dyn Fn(LogPoint) -> f64>,
) -> Vec<(Vec<LogPoint>, bool)> {
    let v = |i: usize, j: usize| values[i * n + j];
    let inside = |i: usize, j: usize| v(i, j) > 0.0;
    let hkey = |i: usize, j: usize| 2 * (i * n + j);
    let vkey = |i: usize, j: usize| 2 * (i * n + j) + 1;
    let crossing_point = |(ai, aj): (usize, usize), (bi, bj): (usize, usize)| {
        let (a, b) = (LogPoint::new(coord(ai), coord(aj)), LogPoint::new(coord(bi), coord(bj)));
        match exact {
            None => {
                let t = v(ai, aj) / (v(ai, aj) - v(bi, bj));
                LogPoint::new(lerp(a.lx, b.lx, t), lerp(a.ly, b.ly, t))
            }
            Some(f) => {
                let (mut lo, mut hi) = if inside(ai, aj) { (a, b) } else { (b, a) };
                for _ in 0..60 {
                    let mid = LogPoint::new(0.5 * (lo.lx + hi.lx), 0.5 * (lo.ly + hi.ly));
                    if f(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            }
        }
    };

    let mut points: HashMap<usize, LogPoint> = HashMap::new();
    let mut segments: Vec<(usize, usize)> = Vec::new();
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let c = [inside(i, j), inside(i + 1, j), inside(i + 1, j + 1), inside(i, j + 1)];
            // edges: bottom (c0-c1), right (c1-c2), top (c3-c2), left (c0-c3)
            let keys = [hkey(i, j), vkey(i + 1, j), hkey(i, j + 1), vkey(i, j)];
            let crossing = [c[0] != c[1], c[1] != c[2], c[3] != c[2], c[0] != c[3]];
            let mut present = Vec::with_capacity(4);
            for e in 0..4 {
                if !crossing[e] {
                    continue;
                }
                present.push(e);
                points.entry(keys[e]).or_insert_with(|| match e {
                    0 => crossing_point((i, j), (i + 1, j)),
                    1 => crossing_point((i + 1, j), (i + 1, j + 1)),
                    2 => crossing_point((i, j + 1), (i + 1, j + 1)),
                    _ => crossing_point((i, j), (i, j + 1)),
                });
            }
            match present.len() {
                0 => {}
                2 => segments.push((keys[present[0]], keys[present[1]])),
                _ => {
                    let center = 0.25 * (v(i, j) + v(i + 1, j) + v(i + 1, j + 1) + v(i, j + 1)) > 0.0;
                    if center == c[0] {
                        // c0 and c2 connect through the center; cut off c1 and c3
                        segments.push((keys[0], keys[1]));
                        segments.push((keys[2], keys[3]));
                    } else {
                        segments.push((keys[0], keys[3]));
                        segments.push((keys[1], keys[2]));
                    }
                }
            }
        }
    }

    let mut at_edge: HashMap<usize, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        at_edge.entry(a).or_default().push(s);
        at_edge.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let walk = |start_seg: usize, start_edge: usize, used: &mut Vec<bool>| {
        let mut chain = vec![points[&start_edge]];
        let (mut seg, mut edge) = (start_seg, start_edge);
        loop {
            used[seg] = true;
            let (a, b) = segments[seg];
            let next = if a == edge { b } else { a };
            chain.push(points[&next]);
            match at_edge[&next].iter().find(|&&s| !used[s]) {
                Some(&s) => {
                    seg = s;
                    edge = next;
                }
                None => {
                    let closed = next == start_edge;
                    return (chain, closed);
                }
            }
        }
    };
    let mut out = Vec::new();
    // open chains start at an edge with a single segment
    for s in 0..segments.len() {
        if used[s] {
            continue;
        }
        let (a, b) = segments[s];
        if at_edge[&a].len() == 1 {
            out.push(walk(s, a, &mut used));
        } else if at_edge[&b].len() == 1 {
            out.push(walk(s, b, &mut used));
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            out.push(walk(s, segments[s].0, &mut used));
        }
    }
    out
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}
