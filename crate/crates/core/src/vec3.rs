//! Small helpers for `[f64; 3]` vectors.

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// `a + s b`
#[inline]
pub fn axpy(a: Vec3, s: f64, b: Vec3) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

/// Unit vector along `a`; `a` unchanged when it is zero.
#[inline]
pub fn normalize(a: Vec3) -> Vec3 {
    let r = norm(a);
    if r == 0.0 {
        a
    } else {
        scale(a, 1.0 / r)
    }
}

/// Orthonormal pair `(e_a, e_b)` with `e_a x e_b = m`, for unit `m`.
pub fn tangent_basis(m: Vec3) -> (Vec3, Vec3) {
    // pick the coordinate axis least aligned with m
    let mut axis = 0;
    for k in 1..3 {
        if m[k].abs() < m[axis].abs() {
            axis = k;
        }
    }
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let ea = normalize(sub(e, scale(m, dot(e, m))));
    let eb = cross(m, ea);
    (ea, eb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_right_handed() {
        for m in [[0.0, 0.0, 1.0], [0.6, 0.0, 0.8], normalize([1.0, -2.0, 0.5])] {
            let (a, b) = tangent_basis(m);
            assert!((dot(a, m)).abs() < 1e-15);
            assert!((dot(b, m)).abs() < 1e-15);
            assert!((norm(a) - 1.0).abs() < 1e-15);
            assert!((norm(b) - 1.0).abs() < 1e-15);
            let c = cross(a, b);
            assert!(norm(sub(c, m)) < 1e-15);
        }
        let (a, b) = tangent_basis([0.0, 0.0, 1.0]);
        assert_eq!(a, [1.0, 0.0, 0.0]);
        assert_eq!(b, [0.0, 1.0, 0.0]);
    }
}
