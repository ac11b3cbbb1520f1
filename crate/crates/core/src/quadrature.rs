//! Symmetric quadrature rules on the reference triangle
//! `{(ξ, η) : ξ ≥ 0, η ≥ 0, ξ + η ≤ 1}` and Gauss-Legendre rules on `[0, 1]`.
//!
//! Triangle weights are scaled so they sum to the reference area 1/2.

/// A quadrature rule in barycentric form.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    /// Reference coordinates `(ξ, η)`.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Rule exact for polynomials of the requested total degree (4, 6 or 8).
    pub fn of_degree(degree: usize) -> Self {
        match degree {
            0..=4 => Self::dunavant4(),
            5 | 6 => Self::dunavant6(),
            _ => Self::dunavant8(),
        }
    }

    fn build(degree: usize, groups: &[(Orbit, f64)]) -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for &(orbit, w) in groups {
            for bary in orbit.expand() {
                points.push([bary[1], bary[2]]);
                weights.push(0.5 * w);
            }
        }
        TriangleRule {
            degree,
            points,
            weights,
        }
    }

    fn dunavant4() -> Self {
        Self::build(
            4,
            &[
                (Orbit::S21(0.445948490915965), 0.223381589678011),
                (Orbit::S21(0.091576213509771), 0.109951743655322),
            ],
        )
    }

    fn dunavant6() -> Self {
        Self::build(
            6,
            &[
                (Orbit::S21(0.249286745170910), 0.116786275726379),
                (Orbit::S21(0.063089014491502), 0.050844906370207),
                (
                    Orbit::S111(0.053145049844817, 0.310352451033784),
                    0.082851075618374,
                ),
            ],
        )
    }

    fn dunavant8() -> Self {
        Self::build(
            8,
            &[
                (Orbit::S3, 0.144315607677787),
                (Orbit::S21(0.459292588292723), 0.095091634267285),
                (Orbit::S21(0.170569307751760), 0.103217370534718),
                (Orbit::S21(0.050547228317031), 0.032458497623198),
                (
                    Orbit::S111(0.008394777409958, 0.263112829634638),
                    0.027230314174435,
                ),
            ],
        )
    }
}

#[derive(Debug, Clone, Copy)]
enum Orbit {
    S3,
    S21(f64),
    S111(f64, f64),
}

impl Orbit {
    fn expand(self) -> Vec<[f64; 3]> {
        match self {
            Orbit::S3 => vec![[1.0 / 3.0; 3]],
            Orbit::S21(a) => {
                let b = 1.0 - 2.0 * a;
                vec![[a, a, b], [a, b, a], [b, a, a]]
            }
            Orbit::S111(a, b) => {
                let c = 1.0 - a - b;
                vec![
                    [a, b, c],
                    [a, c, b],
                    [b, a, c],
                    [b, c, a],
                    [c, a, b],
                    [c, b, a],
                ]
            }
        }
    }
}

/// Gauss-Legendre rule mapped to `[0, 1]` (weights sum to 1).
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let raw: Vec<(f64, f64)> = match n {
        1 => vec![(0.0, 2.0)],
        2 => {
            let p = 1.0 / 3f64.sqrt();
            vec![(-p, 1.0), (p, 1.0)]
        }
        3 => {
            let p = (3.0f64 / 5.0).sqrt();
            vec![(-p, 5.0 / 9.0), (0.0, 8.0 / 9.0), (p, 5.0 / 9.0)]
        }
        _ => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            vec![(-b, wb), (-a, wa), (a, wa), (b, wb)]
        }
    };
    raw.into_iter()
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    // ∫_T ξ^i η^j = i! j! / (i + j + 2)!
    fn exact_monomial(i: u32, j: u32) -> f64 {
        factorial(i) * factorial(j) / factorial(i + j + 2)
    }

    #[test]
    fn rules_integrate_monomials_exactly() {
        for degree in [4, 6, 8] {
            let rule = TriangleRule::of_degree(degree);
            for i in 0..=degree as u32 {
                for j in 0..=(degree as u32 - i) {
                    let approx: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(p, w)| w * p[0].powi(i as i32) * p[1].powi(j as i32))
                        .sum();
                    let exact = exact_monomial(i, j);
                    assert!(
                        (approx - exact).abs() <= 1e-14,
                        "degree {degree}: x^{i} y^{j} {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn point_counts() {
        assert_eq!(TriangleRule::of_degree(4).len(), 6);
        assert_eq!(TriangleRule::of_degree(6).len(), 12);
        assert_eq!(TriangleRule::of_degree(8).len(), 16);
    }

    #[test]
    fn gauss_rules_exact_on_unit_interval() {
        for n in 1..=4usize {
            let rule = gauss_legendre_unit(n);
            for p in 0..(2 * n) as i32 {
                let s: f64 = rule.iter().map(|(x, w)| w * x.powi(p)).sum();
                assert!((s - 1.0 / (p as f64 + 1.0)).abs() < 1e-15);
            }
        }
    }
}
