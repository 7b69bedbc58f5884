//! Ray traversal through a pixel grid.
//!
//! Walks the segment between two points across an n x n grid of square
//! cells, emitting `(ix, iy, intersection_length)` for every cell crossed.
//! Cell membership is decided at sub-segment midpoints, which realizes
//! half-open pixel boundaries with ties broken toward increasing index;
//! rays missing the grid emit nothing.

/// Trace the segment `p0 -> p1` across the grid with lower-left corner
/// `(xmin, ymin)`, `n` cells per side, cell size `h`.
pub fn trace_ray(
    p0: (f64, f64),
    p1: (f64, f64),
    n: usize,
    h: f64,
    xmin: f64,
    ymin: f64,
    mut emit: impl FnMut(usize, usize, f64),
) {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let dx = x1 - x0;
    let dy = y1 - y0;
    let length = dx.hypot(dy);
    if length == 0.0 {
        return;
    }
    let xmax = xmin + n as f64 * h;
    let ymax = ymin + n as f64 * h;

    // Clip the parameter interval to the grid (slab method).
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    if dx != 0.0 {
        let (a, b) = ((xmin - x0) / dx, (xmax - x0) / dx);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    } else if x0 < xmin || x0 >= xmax {
        return;
    }
    if dy != 0.0 {
        let (a, b) = ((ymin - y0) / dy, (ymax - y0) / dy);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    } else if y0 < ymin || y0 >= ymax {
        return;
    }
    if t0 >= t1 {
        return;
    }

    // Boundary-crossing parameters along each axis, each list ascending in t.
    let crossings = |origin: f64, delta: f64, lo: f64| -> Vec<f64> {
        if delta == 0.0 {
            return Vec::new();
        }
        let start = origin + t0 * delta;
        let end = origin + t1 * delta;
        let mut ts = Vec::new();
        if delta > 0.0 {
            let k0 = ((start - lo) / h).ceil() as i64;
            let k1 = ((end - lo) / h).floor() as i64;
            for k in k0..=k1 {
                ts.push((lo + k as f64 * h - origin) / delta);
            }
        } else {
            let k0 = ((start - lo) / h).floor() as i64;
            let k1 = ((end - lo) / h).ceil() as i64;
            for k in (k1..=k0).rev() {
                ts.push((lo + k as f64 * h - origin) / delta);
            }
        }
        ts
    };
    let tx = crossings(x0, dx, xmin);
    let ty = crossings(y0, dy, ymin);

    // Merge the two sorted lists and walk sub-segments.
    let mut ix = 0;
    let mut iy = 0;
    let mut t_prev = t0;
    let mut segment = |t_next: f64, emit: &mut dyn FnMut(usize, usize, f64)| {
        let t_next = t_next.clamp(t0, t1);
        if t_next > t_prev {
            let tm = 0.5 * (t_prev + t_next);
            let cx = ((x0 + tm * dx - xmin) / h).floor();
            let cy = ((y0 + tm * dy - ymin) / h).floor();
            if cx >= 0.0 && cy >= 0.0 && (cx as usize) < n && (cy as usize) < n {
                emit(cx as usize, cy as usize, (t_next - t_prev) * length);
            }
            t_prev = t_next;
        }
    };
    while ix < tx.len() || iy < ty.len() {
        let take_x = match (tx.get(ix), ty.get(iy)) {
            (Some(&a), Some(&b)) => a <= b,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => unreachable!(),
        };
        if take_x {
            segment(tx[ix], &mut emit);
            ix += 1;
        } else {
            segment(ty[iy], &mut emit);
            iy += 1;
        }
    }
    segment(t1, &mut emit);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collect(p0: (f64, f64), p1: (f64, f64), n: usize, h: f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        trace_ray(p0, p1, n, h, -1.0, -1.0, |ix, iy, len| out.push((ix, iy, len)));
        out
    }

    #[test]
    fn horizontal_ray_crosses_one_row() {
        // y = 0.25 lies inside row 2 of a 4x4 grid over [-1,1].
        let segs = collect((-5.0, 0.25), (5.0, 0.25), 4, 0.5);
        assert_eq!(segs.len(), 4);
        let total: f64 = segs.iter().map(|s| s.2).sum();
        assert!((total - 2.0).abs() < 1e-12);
        assert!(segs.iter().all(|&(_, iy, _)| iy == 2));
        let cols: Vec<usize> = segs.iter().map(|s| s.0).collect();
        assert_eq!(cols, vec![0, 1, 2, 3]);
    }

    #[test]
    fn ray_on_gridline_takes_the_upper_cell() {
        // y = 0 is the boundary between rows 1 and 2; ties go to the
        // increasing index.
        let segs = collect((-5.0, 0.0), (5.0, 0.0), 4, 0.5);
        assert!(segs.iter().all(|&(_, iy, _)| iy == 2));
        let total: f64 = segs.iter().map(|s| s.2).sum();
        assert!((total - 2.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_ray_has_sqrt2_total_length_per_cell() {
        let segs = collect((-2.0, -2.0), (2.0, 2.0), 4, 0.5);
        let total: f64 = segs.iter().map(|s| s.2).sum();
        assert!((total - 2.0 * 2.0f64.sqrt()).abs() < 1e-9, "total {total}");
        // The exact diagonal visits the 4 diagonal cells.
        for &(ix, iy, _) in &segs {
            assert_eq!(ix, iy);
        }
    }

    #[test]
    fn ray_missing_the_grid_emits_nothing() {
        assert!(collect((-5.0, 3.0), (5.0, 3.0), 4, 0.5).is_empty());
        assert!(collect((-5.0, 1.0), (5.0, 1.0), 4, 0.5).is_empty()); // top edge
    }

    #[test]
    fn vertical_ray_inside_one_column() {
        let segs = collect((0.3, -4.0), (0.3, 4.0), 4, 0.5);
        assert!(segs.iter().all(|&(ix, _, _)| ix == 2));
        let total: f64 = segs.iter().map(|s| s.2).sum();
        assert!((total - 2.0).abs() < 1e-12);
    }
}
