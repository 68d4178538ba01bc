//! Static SVG rendering of a feasibility map: shaded `−√|u|` where the
//! coherence would be imaginary, the `u = 0` contour, and red dashed frames
//! around accessible rows.

use std::fmt::Write as _;

use popctl_core::FeasibilityGrid;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const MAX_TIME_CELLS: usize = 240;
const MAX_AXIS_CELLS: usize = 201;

struct Frame {
    t_lo: f64,
    t_hi: f64,
    v_lo: f64,
    v_hi: f64,
}

impl Frame {
    fn x(&self, t: f64) -> f64 {
        LEFT + (t - self.t_lo) / (self.t_hi - self.t_lo) * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let span = self.v_hi - self.v_lo;
        let frac = if span > 0.0 { (v - self.v_lo) / span } else { 0.5 };
        HEIGHT - BOTTOM - frac * (HEIGHT - TOP - BOTTOM)
    }
}

fn stride(n: usize, max: usize) -> usize {
    n.div_ceil(max).max(1)
}

fn shade(frac: f64) -> String {
    let lerp = |a: f64, b: f64| (a + (b - a) * frac.clamp(0.0, 1.0)).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(247.0, 8.0), lerp(251.0, 48.0), lerp(255.0, 107.0))
}

/// Points where `u` crosses zero on the edges of one cell, by linear
/// interpolation. Corners are (x0,y0,u00), (x1,y0,u10), (x1,y1,u11), (x0,y1,u01).
fn cell_segments(x: [f64; 2], y: [f64; 2], u: [[f64; 2]; 2]) -> Vec<((f64, f64), (f64, f64))> {
    let corners = [(x[0], y[0], u[0][0]), (x[1], y[0], u[1][0]), (x[1], y[1], u[1][1]), (x[0], y[1], u[0][1])];
    let mut pts = Vec::new();
    for e in 0..4 {
        let (xa, ya, ua) = corners[e];
        let (xb, yb, ub) = corners[(e + 1) % 4];
        if (ua >= 0.0) != (ub >= 0.0) {
            let s = ua / (ua - ub);
            pts.push((xa + s * (xb - xa), ya + s * (yb - ya)));
        }
    }
    pts.chunks_exact(2).map(|p| (p[0], p[1])).collect()
}

pub fn render(grid: &FeasibilityGrid) -> String {
    let time = grid.time();
    let axis = grid.axis();
    let ts = stride(time.len(), MAX_TIME_CELLS);
    let vs = stride(axis.steps, MAX_AXIS_CELLS);
    let t_idx: Vec<usize> = (0..time.len()).step_by(ts).collect();
    let v_idx: Vec<usize> = (0..axis.steps).step_by(vs).collect();
    let frame = Frame { t_lo: time.start(), t_hi: time.end(), v_lo: axis.min, v_hi: axis.max };

    let floor = (0..axis.steps)
        .flat_map(|i| (0..time.len()).map(move |k| (i, k)))
        .map(|(i, k)| grid.imag_h(i, k))
        .fold(0.0f64, f64::min);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // cells, each centred on its sample
    let half_w = |a: usize, b: usize| (frame.x(time.time(b)) - frame.x(time.time(a))).abs();
    for (jj, &i) in v_idx.iter().enumerate() {
        let v = axis.value(i);
        let y_next = v_idx.get(jj + 1).map_or(frame.y(v), |&n| frame.y(axis.value(n)));
        let y_prev = if jj > 0 { frame.y(axis.value(v_idx[jj - 1])) } else { frame.y(v) };
        let h_up = (frame.y(v) - y_next).abs().max((y_prev - frame.y(v)).abs());
        for (kk, &k) in t_idx.iter().enumerate() {
            let ih = grid.imag_h(i, k);
            if ih == 0.0 {
                continue;
            }
            let w = t_idx.get(kk + 1).map_or_else(|| half_w(t_idx[kk.saturating_sub(1)], k), |&n| half_w(k, n));
            let frac = if floor < 0.0 { ih / floor } else { 0.0 };
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                frame.x(time.time(k)) - 0.5 * w,
                frame.y(v) - 0.5 * h_up,
                w,
                h_up,
                shade(frac)
            );
        }
    }

    // u = 0 contour
    let mut path = String::new();
    for jj in 0..v_idx.len().saturating_sub(1) {
        let (i0, i1) = (v_idx[jj], v_idx[jj + 1]);
        for kk in 0..t_idx.len().saturating_sub(1) {
            let (k0, k1) = (t_idx[kk], t_idx[kk + 1]);
            let x = [frame.x(time.time(k0)), frame.x(time.time(k1))];
            let y = [frame.y(axis.value(i0)), frame.y(axis.value(i1))];
            let u = [[grid.u(i0, k0), grid.u(i1, k0)], [grid.u(i0, k1), grid.u(i1, k1)]];
            for (a, b) in cell_segments(x, y, u) {
                let _ = write!(path, "M{:.2} {:.2}L{:.2} {:.2}", a.0, a.1, b.0, b.1);
            }
        }
    }
    if !path.is_empty() {
        let _ = writeln!(s, r#"<path d="{path}" fill="none" stroke="black" stroke-width="1"/>"#);
    }

    for run in grid.accessible_runs() {
        let (y_top, y_bot) = (frame.y(run.hi), frame.y(run.lo));
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="red" stroke-width="2" stroke-dasharray="6 4"/>"#,
            LEFT,
            y_top - 2.0,
            WIDTH - LEFT - RIGHT,
            (y_bot - y_top) + 4.0
        );
    }

    // axes
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ =
        writeln!(s, r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
    for (t, anchor) in [(frame.t_lo, "start"), (frame.t_hi, "end")] {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="{anchor}">{t}</text>"#, frame.x(t), y0 + 16.0);
    }
    for v in [frame.v_lo, frame.v_hi] {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v}</text>"#, x0 - 6.0, frame.y(v) + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t (a.u.)</text>"#,
        0.5 * (x0 + x1),
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        0.5 * (y0 + y1),
        0.5 * (y0 + y1),
        axis.param.name()
    );
    s.push_str("</svg>\n");
    s
}
