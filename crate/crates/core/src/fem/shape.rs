//! Lagrange shape functions on the reference triangle with vertices
//! (0,0), (1,0), (0,1). Quadratic nodes are ordered v0, v1, v2, m01, m12, m20.

pub fn p1_values(xi: [f64; 2]) -> [f64; 3] {
    [1.0 - xi[0] - xi[1], xi[0], xi[1]]
}

pub const P1_GRAD_REF: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

pub fn p2_values(xi: [f64; 2]) -> [f64; 6] {
    let [l0, l1, l2] = p1_values(xi);
    [
        l0 * (2.0 * l0 - 1.0),
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        4.0 * l0 * l1,
        4.0 * l1 * l2,
        4.0 * l2 * l0,
    ]
}

pub fn p2_grad_ref(xi: [f64; 2]) -> [[f64; 2]; 6] {
    let [l0, l1, l2] = p1_values(xi);
    let g = P1_GRAD_REF;
    let quad = |l: f64, d: [f64; 2]| [(4.0 * l - 1.0) * d[0], (4.0 * l - 1.0) * d[1]];
    let prod = |la: f64, da: [f64; 2], lb: f64, db: [f64; 2]| {
        [4.0 * (la * db[0] + lb * da[0]), 4.0 * (la * db[1] + lb * da[1])]
    };
    [
        quad(l0, g[0]),
        quad(l1, g[1]),
        quad(l2, g[2]),
        prod(l0, g[0], l1, g[1]),
        prod(l1, g[1], l2, g[2]),
        prod(l2, g[2], l0, g[0]),
    ]
}

/// Reference Hessians of the quadratic basis (constant on the element).
pub fn p2_hess_ref() -> [[[f64; 2]; 2]; 6] {
    let g = P1_GRAD_REF;
    let outer = |s: f64, a: [f64; 2], b: [f64; 2]| {
        [
            [s * (a[0] * b[0] + b[0] * a[0]), s * (a[0] * b[1] + b[0] * a[1])],
            [s * (a[1] * b[0] + b[1] * a[0]), s * (a[1] * b[1] + b[1] * a[1])],
        ]
    };
    [
        outer(2.0, g[0], g[0]),
        outer(2.0, g[1], g[1]),
        outer(2.0, g[2], g[2]),
        outer(4.0, g[0], g[1]),
        outer(4.0, g[1], g[2]),
        outer(4.0, g[2], g[0]),
    ]
}

/// Reference coordinates of the six quadratic nodes.
pub const P2_NODES_REF: [[f64; 2]; 6] = [
    [0.0, 0.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [0.5, 0.0],
    [0.5, 0.5],
    [0.0, 0.5],
];
