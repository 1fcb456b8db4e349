//! Fixed-size row-major matrix helpers.
//!
//! Everything here works on plain arrays so the hot paths stay allocation
//! free and generic over [`Real`].

use crate::scalar::Real;

pub type Vec2<T> = [T; 2];
pub type Vec3<T> = [T; 3];
pub type Mat2<T> = [[T; 2]; 2];
pub type Mat3<T> = [[T; 3]; 3];
pub type Mat23<T> = [[T; 3]; 2];
pub type Mat4<T> = [[T; 4]; 4];

#[inline]
pub fn dot3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn add3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub3<T: Real>(a: Vec3<T>, b: Vec3<T>) -> Vec3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale3<T: Real>(a: Vec3<T>, s: T) -> Vec3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn norm3<T: Real>(a: Vec3<T>) -> T {
    dot3(a, a).sqrt()
}

pub fn identity3<T: Real>() -> Mat3<T> {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

pub fn identity4<T: Real>() -> Mat4<T> {
    let mut m = [[T::zero(); 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::one();
    }
    m
}

pub fn transpose3<T: Real>(m: &Mat3<T>) -> Mat3<T> {
    let mut r = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = m[j][i];
        }
    }
    r
}

pub fn mul33<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut r = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    r
}

pub fn mul44<T: Real>(a: &Mat4<T>, b: &Mat4<T>) -> Mat4<T> {
    let mut r = [[T::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = T::zero();
            for k in 0..4 {
                acc += a[i][k] * b[k][j];
            }
            r[i][j] = acc;
        }
    }
    r
}

#[inline]
pub fn mat3_vec<T: Real>(m: &Mat3<T>, v: Vec3<T>) -> Vec3<T> {
    [dot3(m[0], v), dot3(m[1], v), dot3(m[2], v)]
}

#[inline]
pub fn mat3t_vec<T: Real>(m: &Mat3<T>, v: Vec3<T>) -> Vec3<T> {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

/// `a (2x3) * b (3x3)`.
pub fn mul23_33<T: Real>(a: &Mat23<T>, b: &Mat3<T>) -> Mat23<T> {
    let mut r = [[T::zero(); 3]; 2];
    for i in 0..2 {
        for j in 0..3 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    r
}

/// `a (2x3) * b^T` with `b` 2x3, giving a 2x2.
pub fn mul23_23t<T: Real>(a: &Mat23<T>, b: &Mat23<T>) -> Mat2<T> {
    let mut r = [[T::zero(); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            r[i][j] = dot3(a[i], b[j]);
        }
    }
    r
}

/// `a^T (3x2) * b (2x3)`.
pub fn mul23t_23<T: Real>(a: &Mat23<T>, b: &Mat23<T>) -> Mat3<T> {
    let mut r = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = a[0][i] * b[0][j] + a[1][i] * b[1][j];
        }
    }
    r
}

/// `a (2x2) * b (2x3)`.
pub fn mul22_23<T: Real>(a: &Mat2<T>, b: &Mat23<T>) -> Mat23<T> {
    let mut r = [[T::zero(); 3]; 2];
    for i in 0..2 {
        for j in 0..3 {
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    r
}

#[inline]
pub fn mat23_vec<T: Real>(m: &Mat23<T>, v: Vec3<T>) -> Vec2<T> {
    [dot3(m[0], v), dot3(m[1], v)]
}

#[inline]
pub fn mat23t_vec<T: Real>(m: &Mat23<T>, v: Vec2<T>) -> Vec3<T> {
    [
        m[0][0] * v[0] + m[1][0] * v[1],
        m[0][1] * v[0] + m[1][1] * v[1],
        m[0][2] * v[0] + m[1][2] * v[1],
    ]
}

#[inline]
pub fn mat2_vec<T: Real>(m: &Mat2<T>, v: Vec2<T>) -> Vec2<T> {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

pub fn mul22<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    [
        [
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
        ],
        [
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        ],
    ]
}

#[inline]
pub fn det2<T: Real>(m: &Mat2<T>) -> T {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Inverse of a 2x2 matrix, `None` when singular.
pub fn inv2<T: Real>(m: &Mat2<T>) -> Option<Mat2<T>> {
    let det = det2(m);
    if det == T::zero() || !det.is_finite() {
        return None;
    }
    let inv = T::one() / det;
    Some([[m[1][1] * inv, -m[0][1] * inv], [-m[1][0] * inv, m[0][0] * inv]])
}

/// Eigenvalues of a symmetric 2x2 matrix, larger first.
pub fn sym2_eigenvalues<T: Real>(m: &Mat2<T>) -> (T, T) {
    let half = T::lit(0.5);
    let mid = half * (m[0][0] + m[1][1]);
    let disc = (mid * mid - det2(m)).max(T::zero()).sqrt();
    (mid + disc, mid - disc)
}

/// Rotation matrix of the quaternion `(w, x, y, z)` after normalization.
pub fn quat_to_rot<T: Real>(q: [T; 4]) -> Mat3<T> {
    let q = quat_normalize(q);
    unit_quat_to_rot(q)
}

pub fn quat_normalize<T: Real>(q: [T; 4]) -> [T; 4] {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

pub fn unit_quat_to_rot<T: Real>(q: [T; 4]) -> Mat3<T> {
    let [w, x, y, z] = q;
    let one = T::one();
    let two = T::lit(2.0);
    [
        [
            one - two * (y * y + z * z),
            two * (x * y - w * z),
            two * (x * z + w * y),
        ],
        [
            two * (x * y + w * z),
            one - two * (x * x + z * z),
            two * (y * z - w * x),
        ],
        [
            two * (x * z - w * y),
            two * (y * z + w * x),
            one - two * (x * x + y * y),
        ],
    ]
}

/// Pulls a gradient on the rotation matrix back to the raw (unnormalized)
/// quaternion that produced it through [`quat_to_rot`].
pub fn quat_to_rot_backward<T: Real>(q_raw: [T; 4], d_rot: &Mat3<T>) -> [T; 4] {
    let n = (q_raw[0] * q_raw[0] + q_raw[1] * q_raw[1] + q_raw[2] * q_raw[2] + q_raw[3] * q_raw[3])
        .sqrt();
    let q = [q_raw[0] / n, q_raw[1] / n, q_raw[2] / n, q_raw[3] / n];
    let [w, x, y, z] = q;
    let g = d_rot;
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let dw = two
        * (-z * g[0][1] + y * g[0][2] + z * g[1][0] - x * g[1][2] - y * g[2][0] + x * g[2][1]);
    let dx = two * (y * g[0][1] + z * g[0][2] + y * g[1][0] - w * g[1][2] + z * g[2][0] + w * g[2][1])
        - four * x * (g[1][1] + g[2][2]);
    let dy = two * (x * g[0][1] + w * g[0][2] + x * g[1][0] + z * g[1][2] - w * g[2][0] + z * g[2][1])
        - four * y * (g[0][0] + g[2][2]);
    let dz = two * (-w * g[0][1] + x * g[0][2] + w * g[1][0] + y * g[1][2] + x * g[2][0] + y * g[2][1])
        - four * z * (g[0][0] + g[1][1]);
    let dq = [dw, dx, dy, dz];
    // d(q/|q|) = (I - q q^T) / |q|
    let proj = dq[0] * q[0] + dq[1] * q[1] + dq[2] * q[2] + dq[3] * q[3];
    [
        (dq[0] - q[0] * proj) / n,
        (dq[1] - q[1] * proj) / n,
        (dq[2] - q[2] * proj) / n,
        (dq[3] - q[3] * proj) / n,
    ]
}

/// Rigid inverse of a 4x4 transform with orthonormal rotation block.
pub fn rigid_inverse<T: Real>(m: &Mat4<T>) -> (Mat3<T>, Vec3<T>) {
    let rot = [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ];
    let t = [m[0][3], m[1][3], m[2][3]];
    let tr = mat3_vec(&rot, t);
    (rot, [-tr[0], -tr[1], -tr[2]])
}
