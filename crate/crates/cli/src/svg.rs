//! Native SVG bifurcation diagrams.

use std::fmt::Write;

const STABLE: &str = "#1f5fa8";
const UNSTABLE: &str = "#c0392b";

/// One branch point: `lambda`, `||u||_{L^2}`, linear stability.
#[derive(Debug, Clone, Copy)]
pub struct BranchSample {
    pub lambda: f64,
    pub amplitude: f64,
    pub stable: bool,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    left: f64,
    top: f64,
    width: f64,
    height: f64,
}

fn pad(lo: f64, hi: f64, frac: f64) -> (f64, f64) {
    let span = if hi > lo { hi - lo } else { lo.abs().max(1.0) };
    (lo - frac * span, hi + frac * span)
}

fn label(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if (1e-2..1e4).contains(&a) {
        let s = format!("{x:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{x:.2e}")
    }
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str, title: &str) {
        let (l, t, w, h) = (self.left, self.top, self.width, self.height);
        let _ = writeln!(
            out,
            r##"<rect x="{l:.2}" y="{t:.2}" width="{w:.2}" height="{h:.2}" fill="none" stroke="#333" stroke-width="1"/>"##
        );
        for k in 0..=4 {
            let fx = self.x.0 + (self.x.1 - self.x.0) * k as f64 / 4.0;
            let fy = self.y.0 + (self.y.1 - self.y.0) * k as f64 / 4.0;
            let (x, y) = (self.px(fx), self.py(fy));
            let _ = writeln!(
                out,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/><text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"##,
                t + h,
                t + h + 5.0,
                t + h + 18.0,
                label(fx)
            );
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{l:.2}" y2="{y:.2}" stroke="#333"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"##,
                l - 5.0,
                l - 8.0,
                y + 4.0,
                label(fy)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{xlabel}</text>"#,
            l + w / 2.0,
            t + h + 36.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{ylabel}</text>"#,
            l - 48.0,
            t + h / 2.0,
            l - 48.0,
            t + h / 2.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{title}</text>"#,
            l + w / 2.0,
            t - 10.0
        );
    }

    fn path(&self, out: &mut String, pts: &[(f64, f64)], color: &str, dashed: bool) {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let dash = if dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            coords.join(" ")
        );
    }

    fn dot(&self, out: &mut String, x: f64, y: f64, color: &str) {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#,
            self.px(x),
            self.py(y)
        );
    }

    /// Polyline split into runs of equal stability; a segment takes the
    /// style of its right end.
    fn styled(&self, out: &mut String, pts: &[(f64, f64, bool)]) {
        let mut start = 0;
        for j in 1..pts.len() {
            let stable = pts[j].2;
            if j + 1 == pts.len() || pts[j + 1].2 != stable {
                let run: Vec<(f64, f64)> = pts[start..=j].iter().map(|p| (p.0, p.1)).collect();
                self.path(out, &run, if stable { STABLE } else { UNSTABLE }, !stable);
                start = j;
            }
        }
    }
}

fn document(width: f64, height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// Pitchfork diagram: trivial branch (stable left of onset, dashed right of
/// it), onset marker, and the arcs `+-||u||` for `u` and `u_-`.
pub fn bifurcation(samples: &[BranchSample], onset: f64) -> String {
    let lmax = samples.iter().map(|s| s.lambda).fold(onset, f64::max);
    let amax = samples
        .iter()
        .map(|s| s.amplitude)
        .fold(0.0, f64::max)
        .max(1e-12);
    let span = (lmax - onset).max(1e-12);
    let frame = Frame {
        x: pad(onset - 0.5 * span, lmax, 0.04),
        y: pad(-amax, amax, 0.08),
        left: 80.0,
        top: 40.0,
        width: 520.0,
        height: 340.0,
    };
    let mut body = String::new();
    frame.axes(&mut body, "λ", "±‖u‖ in L²", "supercritical pitchfork");
    frame.path(&mut body, &[(frame.x.0, 0.0), (onset, 0.0)], STABLE, false);
    frame.path(&mut body, &[(onset, 0.0), (frame.x.1, 0.0)], UNSTABLE, true);
    for sign in [1.0, -1.0] {
        let mut pts = vec![(
            onset,
            0.0,
            samples.first().map(|s| s.stable).unwrap_or(true),
        )];
        pts.extend(
            samples
                .iter()
                .map(|s| (s.lambda, sign * s.amplitude, s.stable)),
        );
        frame.styled(&mut body, &pts);
    }
    frame.dot(&mut body, onset, 0.0, "#111");
    let _ = writeln!(
        body,
        r#"<text x="{:.2}" y="{:.2}" font-size="12">λ₁ = {}</text>"#,
        frame.px(onset) + 6.0,
        frame.py(0.0) - 8.0,
        label(onset)
    );
    document(660.0, 430.0, &body)
}

/// One row of a mu-limit table: branch solution at `(mu, lambda)`.
#[derive(Debug, Clone, Copy)]
pub struct LimitSample {
    pub mu: f64,
    pub lambda: f64,
    pub hmu_star: f64,
    pub h10: f64,
}

/// Two panels over `lambda`: (a) critical-form size, bounded as
/// `mu -> mu*`; (b) truncated H^1_0 size, growing without bound.
pub fn mu_limit(samples: &[LimitSample]) -> String {
    let lmin = samples
        .iter()
        .map(|s| s.lambda)
        .fold(f64::INFINITY, f64::min);
    let lmax = samples
        .iter()
        .map(|s| s.lambda)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut body = String::new();
    let panels: [(&str, &str, fn(&LimitSample) -> f64, f64); 2] = [
        ("(a) critical form", "‖u‖ in H_μ*", |s| s.hmu_star, 80.0),
        ("(b) truncated H¹₀", "‖u‖ in H¹₀ (trunc.)", |s| s.h10, 520.0),
    ];
    for (title, ylabel, get, left) in panels {
        let ymax = samples.iter().map(get).fold(0.0, f64::max).max(1e-12);
        let frame = Frame {
            x: pad(lmin, lmax, 0.08),
            y: (0.0, 1.1 * ymax),
            left,
            top: 40.0,
            width: 360.0,
            height: 320.0,
        };
        frame.axes(&mut body, "λ", ylabel, title);
        let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.lambda, get(s))).collect();
        frame.path(&mut body, &pts, STABLE, false);
        for s in samples {
            frame.dot(&mut body, s.lambda, get(s), STABLE);
            let _ = writeln!(
                body,
                r#"<text x="{:.2}" y="{:.2}" font-size="10">μ={}</text>"#,
                frame.px(s.lambda) + 6.0,
                frame.py(get(s)) - 6.0,
                label(s.mu)
            );
        }
    }
    document(920.0, 420.0, &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pitchfork_has_trivial_branch_onset_and_arcs() {
        let s: Vec<BranchSample> = (1..=5)
            .map(|k| BranchSample {
                lambda: 6.0 + k as f64,
                amplitude: (k as f64).sqrt(),
                stable: true,
            })
            .collect();
        let svg = bifurcation(&s, 5.78);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("<circle"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("λ₁ = 5.78"));
    }

    #[test]
    fn stability_changes_split_the_arc() {
        let s = [
            BranchSample {
                lambda: 1.0,
                amplitude: 1.0,
                stable: true,
            },
            BranchSample {
                lambda: 2.0,
                amplitude: 2.0,
                stable: false,
            },
        ];
        let svg = bifurcation(&s, 0.5);
        assert_eq!(svg.matches("<polyline").count(), 2 + 2 * 2);
    }

    #[test]
    fn labels_are_short() {
        assert_eq!(label(5.7831), "5.783");
        assert_eq!(label(2.0), "2");
        assert_eq!(label(1.5e-5), "1.50e-5");
    }
}
