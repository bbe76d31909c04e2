//! Piecewise-linear helpers.
//!
//! Two tools live here. [`Line`] sets describe functions of the form
//! `min_j (slope_j * t + intercept_j)` whose breakpoints can be enumerated
//! symbolically. [`trace`] recovers the breakpoints of an arbitrary
//! continuous PL function that can only be evaluated pointwise, by probing
//! for linearity and intersecting the one-sided slopes at each kink.

/// Relative tolerance used when deciding that three samples are collinear.
const COLLINEAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

impl Line {
    pub const fn new(slope: f64, intercept: f64) -> Self {
        Self { slope, intercept }
    }

    pub const fn constant(value: f64) -> Self {
        Self::new(0.0, value)
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.slope * t + self.intercept
    }

    /// Parameter where the two lines cross, if they are not parallel.
    pub fn intersect(&self, other: &Line) -> Option<f64> {
        let ds = self.slope - other.slope;
        if ds.abs() < 1e-15 {
            None
        } else {
            Some((other.intercept - self.intercept) / ds)
        }
    }

    /// Parameter where the line reaches `value`.
    pub fn root(&self, value: f64) -> Option<f64> {
        if self.slope.abs() < 1e-15 {
            None
        } else {
            Some((value - self.intercept) / self.slope)
        }
    }
}

/// Lower envelope value of a set of lines.
#[inline]
pub fn envelope(lines: &[Line], t: f64) -> f64 {
    lines.iter().fold(f64::INFINITY, |m, l| m.min(l.eval(t)))
}

/// Candidate breakpoints of any function built from min/max/sums of the
/// given lines on `[lo, hi]`: the endpoints plus every pairwise crossing.
pub fn crossing_candidates(lines: &[Line], lo: f64, hi: f64, out: &mut Vec<f64>) {
    out.push(lo);
    out.push(hi);
    for (i, a) in lines.iter().enumerate() {
        for b in &lines[i + 1..] {
            if let Some(t) = a.intersect(b) {
                if t > lo && t < hi {
                    out.push(t);
                }
            }
        }
    }
}

/// `{t in [lo, hi] : min_j line_j(t) >= level}`: a single closed interval or
/// empty.
pub fn envelope_superlevel(lines: &[Line], level: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let (mut a, mut b) = (lo, hi);
    for l in lines {
        if l.slope.abs() < 1e-15 {
            if l.intercept < level {
                return None;
            }
            continue;
        }
        let r = (level - l.intercept) / l.slope;
        if l.slope > 0.0 {
            a = a.max(r);
        } else {
            b = b.min(r);
        }
    }
    (a <= b).then_some((a, b))
}

/// `{t in [lo, hi] : min_j line_j(t) <= level}` as merged closed intervals.
pub fn envelope_sublevel(lines: &[Line], level: f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut parts: Vec<(f64, f64)> = Vec::new();
    for l in lines {
        let (a, b) = if l.slope.abs() < 1e-15 {
            if l.intercept <= level {
                (lo, hi)
            } else {
                continue;
            }
        } else {
            let r = (level - l.intercept) / l.slope;
            if l.slope > 0.0 {
                (lo, r.min(hi))
            } else {
                (r.max(lo), hi)
            }
        };
        if a <= b {
            parts.push((a, b));
        }
    }
    merge_intervals(parts)
}

pub fn merge_intervals(mut parts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    parts.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(parts.len());
    for (a, b) in parts {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Breakpoint list of a continuous piecewise-linear function on `[lo, hi]`.
///
/// The returned vertices are sorted by parameter and include both endpoints;
/// between consecutive vertices the function is linear up to
/// [`COLLINEAR_TOL`]. `max_cell` bounds the width of the initial probing grid,
/// so features narrower than roughly `max_cell / 4` that are invisible at the
/// quarter points may be missed.
pub fn trace<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, max_cell: f64) -> Vec<(f64, f64)> {
    if hi <= lo {
        let v = f(lo);
        return vec![(lo, v)];
    }
    let cells = ((hi - lo) / max_cell).ceil().max(1.0) as usize;
    let step = (hi - lo) / cells as f64;
    let mut out = Vec::with_capacity(cells * 2 + 1);
    let mut a = lo;
    let mut fa = f(a);
    out.push((a, fa));
    for c in 1..=cells {
        let b = if c == cells { hi } else { lo + step * c as f64 };
        let fb = f(b);
        refine(&mut f, a, fa, b, fb, 0, &mut out);
        out.push((b, fb));
        a = b;
        fa = fb;
    }
    out
}

fn collinear(fa: f64, fm: f64, fb: f64, w: f64) -> bool {
    // fm at parameter fraction w in [0, 1]
    let expect = fa + (fb - fa) * w;
    (fm - expect).abs() <= COLLINEAR_TOL * (1.0 + fa.abs().max(fb.abs()))
}

fn refine<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    depth: u32,
    out: &mut Vec<(f64, f64)>,
) {
    let width = b - a;
    if width <= 1e-13 * (1.0 + a.abs()) || depth > 64 {
        return;
    }
    let m = a + 0.5 * width;
    let fm = f(m);
    if collinear(fa, fm, fb, 0.5) {
        let q1 = a + 0.25 * width;
        let q3 = a + 0.75 * width;
        let f1 = f(q1);
        let f3 = f(q3);
        if collinear(fa, f1, fb, 0.25) && collinear(fa, f3, fb, 0.75) {
            return;
        }
    }
    // One-sided slopes near each end; a single kink sits at their crossing.
    let h = width * 1e-3;
    let sl = (f(a + h) - fa) / h;
    let sr = (fb - f(b - h)) / h;
    let left = Line::new(sl, fa - sl * a);
    let right = Line::new(sr, fb - sr * b);
    if let Some(c) = left.intersect(&right) {
        if c > a + h && c < b - h {
            let fc = f(c);
            let tol = 1e-10 * (1.0 + fc.abs());
            if (fc - left.eval(c)).abs() <= tol && (fc - right.eval(c)).abs() <= tol {
                refine(f, a, fa, c, fc, depth + 1, out);
                out.push((c, fc));
                refine(f, c, fc, b, fb, depth + 1, out);
                return;
            }
        }
    }
    refine(f, a, fa, m, fm, depth + 1, out);
    out.push((m, fm));
    refine(f, m, fm, b, fb, depth + 1, out);
}

/// Largest vertex of a traced function; ties within `1e-12` keep the
/// smallest parameter.
pub fn argmax(vertices: &[(f64, f64)]) -> (f64, f64) {
    let mut best = vertices[0];
    for &(t, v) in &vertices[1..] {
        if v > best.1 + 1e-12 {
            best = (t, v);
        }
    }
    best
}

/// Parameters where a traced function crosses `level`, by linear
/// interpolation between breakpoints. Touching points are included.
pub fn level_crossings(vertices: &[(f64, f64)], level: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for w in vertices.windows(2) {
        let ((a, fa), (b, fb)) = (w[0], w[1]);
        let (da, db) = (fa - level, fb - level);
        if da == 0.0 {
            out.push(a);
        } else if da * db < 0.0 {
            out.push(a + (b - a) * da / (da - db));
        }
    }
    if let Some(&(t, v)) = vertices.last() {
        if v == level {
            out.push(t);
        }
    }
    out.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    out
}

/// `{t : f(t) <= level}` from a traced function, as closed intervals.
pub fn sublevel_intervals(vertices: &[(f64, f64)], level: f64) -> Vec<(f64, f64)> {
    let mut parts = Vec::new();
    for w in vertices.windows(2) {
        let ((a, fa), (b, fb)) = (w[0], w[1]);
        let ina = fa <= level;
        let inb = fb <= level;
        match (ina, inb) {
            (true, true) => parts.push((a, b)),
            (true, false) => parts.push((a, a + (b - a) * (level - fa) / (fb - fa))),
            (false, true) => parts.push((a + (b - a) * (level - fa) / (fb - fa), b)),
            (false, false) => {}
        }
    }
    if parts.is_empty() && vertices.len() == 1 && vertices[0].1 <= level {
        parts.push((vertices[0].0, vertices[0].0));
    }
    merge_intervals(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_finds_kinks_of_a_tent() {
        let f = |t: f64| (0.3 - (t - 1.234567).abs()).min(0.1);
        let v = trace(f, 0.0, 3.0, 0.5);
        let (t, val) = argmax(&v);
        assert!((val - 0.1).abs() < 1e-12);
        assert!((t - (1.234567 - 0.2)).abs() < 1e-9, "{t}");
        let roots = level_crossings(&v, 0.0);
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - 0.934567).abs() < 1e-9);
        assert!((roots[1] - 1.534567).abs() < 1e-9);
    }

    #[test]
    fn envelope_sets() {
        let lines = [Line::new(1.0, 0.0), Line::new(-1.0, 4.0)];
        assert_eq!(envelope_superlevel(&lines, 1.0, 0.0, 4.0), Some((1.0, 3.0)));
        assert_eq!(envelope_sublevel(&lines, 1.0, 0.0, 4.0), vec![(0.0, 1.0), (3.0, 4.0)]);
        assert_eq!(envelope_superlevel(&lines, 2.5, 0.0, 4.0), None);
    }

    #[test]
    fn sublevel_of_trace() {
        let v = trace(|t: f64| (t - 1.0).abs(), 0.0, 3.0, 0.4);
        let s = sublevel_intervals(&v, 0.5);
        assert_eq!(s.len(), 1);
        assert!((s[0].0 - 0.5).abs() < 1e-12 && (s[0].1 - 1.5).abs() < 1e-12);
    }
}
