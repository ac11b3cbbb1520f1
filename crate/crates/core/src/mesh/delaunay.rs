//! Bowyer-Watson triangulation of a planar point set.

/// Triangulates `points`, returning counterclockwise vertex triples.
///
/// Insertion order equals the slice order, so the output is a deterministic
/// function of the input.
pub(crate) fn triangulate(points: &[[f64; 2]]) -> Vec<[usize; 3]> {
    let n = points.len();
    if n < 3 {
        return Vec::new();
    }
    let (mut lo, mut hi) = ([f64::MAX; 2], [f64::MIN; 2]);
    for p in points {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let mut pts = points.to_vec();
    pts.push([mid[0] - 20.0 * span, mid[1] - 10.0 * span]);
    pts.push([mid[0] + 20.0 * span, mid[1] - 10.0 * span]);
    pts.push([mid[0], mid[1] + 20.0 * span]);

    let mut tris: Vec<Tri> = vec![Tri::new(&pts, [n, n + 1, n + 2])];
    for (ip, p) in points.iter().enumerate() {
        let mut bad = Vec::new();
        for (t, tri) in tris.iter().enumerate() {
            if tri.circumcircle_contains(p) {
                bad.push(t);
            }
        }
        // Cavity boundary: edges of bad triangles not shared by another bad triangle.
        let mut edges: Vec<[usize; 2]> = Vec::with_capacity(3 * bad.len());
        for &t in &bad {
            let v = tris[t].v;
            for e in [[v[0], v[1]], [v[1], v[2]], [v[2], v[0]]] {
                edges.push(e);
            }
        }
        let mut boundary = Vec::new();
        for (i, e) in edges.iter().enumerate() {
            let shared = edges
                .iter()
                .enumerate()
                .any(|(j, f)| i != j && e[0] == f[1] && e[1] == f[0]);
            if !shared {
                boundary.push(*e);
            }
        }
        for &t in bad.iter().rev() {
            tris.swap_remove(t);
        }
        for e in boundary {
            tris.push(Tri::new(&pts, [e[0], e[1], ip]));
        }
    }
    tris.into_iter()
        .filter(|t| t.v.iter().all(|&i| i < n))
        .map(|t| t.v)
        .collect()
}

struct Tri {
    v: [usize; 3],
    center: [f64; 2],
    radius2: f64,
}

impl Tri {
    fn new(pts: &[[f64; 2]], v: [usize; 3]) -> Self {
        let (a, b, c) = (pts[v[0]], pts[v[1]], pts[v[2]]);
        let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
        let (a2, b2, c2) = (
            a[0] * a[0] + a[1] * a[1],
            b[0] * b[0] + b[1] * b[1],
            c[0] * c[0] + c[1] * c[1],
        );
        let ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d;
        let uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d;
        let radius2 = (a[0] - ux).powi(2) + (a[1] - uy).powi(2);
        // Cavity edges are traversed counterclockwise, so `v` is always CCW.
        Tri {
            v,
            center: [ux, uy],
            radius2,
        }
    }

    fn circumcircle_contains(&self, p: &[f64; 2]) -> bool {
        let d2 = (p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2);
        d2 < self.radius2 * (1.0 - 1e-12)
    }
}
