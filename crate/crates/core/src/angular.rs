//! Angular-momentum algebra for linear rotors.
//!
//! Wigner 3-j symbols are evaluated from the Racah closed form in exact
//! rational arithmetic, so the only rounding happens in the final square
//! root. The orientation operator `cos(theta)` between rigid-rotor kets is
//! expressed through two 3-j symbols and is the only angular coupling the
//! cavity and laser terms need.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest argument of any factorial that the Racah sum can request for
/// j <= 100.
const MAX_FACTORIAL: usize = 3 * 100 + 1;

/// A rigid-rotor ket |J M>.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AngularKet {
    j: u32,
    m: i32,
}

impl AngularKet {
    pub fn new(j: u32, m: i32) -> Result<Self> {
        if m.unsigned_abs() > j {
            return Err(Error::InvalidKet { j, m });
        }
        Ok(Self { j, m })
    }

    pub fn j(&self) -> u32 {
        self.j
    }

    pub fn m(&self) -> i32 {
        self.m
    }
}

fn factorials() -> &'static [BigInt] {
    static TABLE: OnceLock<Vec<BigInt>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(MAX_FACTORIAL + 1);
        let mut acc = BigInt::one();
        table.push(acc.clone());
        for n in 1..=MAX_FACTORIAL {
            acc *= n;
            table.push(acc.clone());
        }
        table
    })
}

fn fact(n: i64) -> &'static BigInt {
    debug_assert!(n >= 0);
    &factorials()[n as usize]
}

/// Wigner 3-j symbol
/// ```text
/// ( j1 j2 j3 )
/// ( m1 m2 m3 )
/// ```
/// for integer angular momenta.
///
/// Selection-rule violations (m1 + m2 + m3 != 0, broken triangle, |m| > j,
/// negative j) give exactly zero.
pub fn wigner3j(j1: i32, j2: i32, j3: i32, m1: i32, m2: i32, m3: i32) -> f64 {
    if m1 + m2 + m3 != 0
        || j1 < 0
        || j2 < 0
        || j3 < 0
        || m1.abs() > j1
        || m2.abs() > j2
        || m3.abs() > j3
        || j3 < (j1 - j2).abs()
        || j3 > j1 + j2
    {
        return 0.0;
    }
    // (j1 j2 j3; 0 0 0) vanishes for odd j1 + j2 + j3.
    if m1 == 0 && m2 == 0 && (j1 + j2 + j3) % 2 != 0 {
        return 0.0;
    }
    assert!(
        ((j1 + j2 + j3) as usize) < MAX_FACTORIAL,
        "wigner3j arguments exceed the factorial table"
    );

    let (j1, j2, j3, m1, m2, m3) = (j1 as i64, j2 as i64, j3 as i64, m1 as i64, m2 as i64, m3 as i64);

    let k_min = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let k_max = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);

    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let denom = fact(k)
            * fact(j3 - j2 + k + m1)
            * fact(j3 - j1 + k - m2)
            * fact(j1 + j2 - j3 - k)
            * fact(j1 - k - m1)
            * fact(j2 - k + m2);
        let term = BigRational::new(BigInt::one(), denom);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return 0.0;
    }

    let triangle = BigRational::new(
        fact(j1 + j2 - j3) * fact(j1 - j2 + j3) * fact(-j1 + j2 + j3),
        fact(j1 + j2 + j3 + 1).clone(),
    );
    let projections = fact(j1 + m1) * fact(j1 - m1) * fact(j2 + m2) * fact(j2 - m2) * fact(j3 + m3) * fact(j3 - m3);

    let squared = &triangle * BigRational::from_integer(projections) * &sum * &sum;
    let magnitude = squared.to_f64().expect("3-j magnitude is representable").sqrt();

    let phase_odd = (j1 - j2 - m3).rem_euclid(2) == 1;
    let negative = sum.is_negative() ^ phase_odd;
    if negative {
        -magnitude
    } else {
        magnitude
    }
}

/// <J M| cos(theta) |J' M'> for rigid-rotor (spherical-harmonic) kets.
///
/// Nonzero only for M = M' and |J - J'| = 1.
pub fn cos_theta_element(bra: AngularKet, ket: AngularKet) -> f64 {
    if bra.m != ket.m || bra.j.abs_diff(ket.j) != 1 {
        return 0.0;
    }
    let (j, jp) = (bra.j as i32, ket.j as i32);
    let (m, mp) = (bra.m, ket.m);
    let prefactor = (((2 * j + 1) * (2 * jp + 1)) as f64).sqrt();
    let phase = if mp.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    prefactor * phase * wigner3j(j, 1, jp, m, 0, -mp) * wigner3j(j, 1, jp, 0, 0, 0)
}

/// Rigid-rotor energy B J(J+1), in the units of `b`.
pub fn rot_energy(b: f64, j: u32) -> f64 {
    let j = j as f64;
    b * j * (j + 1.0)
}

/// Precomputed `cos(theta)` couplings <J M|cos|J+1 M> for J < `j_max`.
///
/// Matrix assembly looks these up instead of re-running the rational
/// arithmetic for every pair of basis states.
#[derive(Debug, Clone)]
pub struct CosThetaTable {
    j_max: u32,
    // up[j][m + j] = <j m| cos |j+1 m>
    up: Vec<Vec<f64>>,
}

impl CosThetaTable {
    pub fn new(j_max: u32) -> Self {
        let up = (0..j_max)
            .map(|j| {
                (-(j as i32)..=j as i32)
                    .map(|m| cos_theta_element(AngularKet { j, m }, AngularKet { j: j + 1, m }))
                    .collect()
            })
            .collect();
        Self { j_max, up }
    }

    pub fn j_max(&self) -> u32 {
        self.j_max
    }

    /// <j m| cos |jp m>; zero outside the selection rules or the table range.
    pub fn get(&self, j: u32, jp: u32, m: i32) -> f64 {
        let lo = j.min(jp);
        if j.abs_diff(jp) != 1 || lo >= self.j_max || m.unsigned_abs() > lo {
            return 0.0;
        }
        self.up[lo as usize][(m + lo as i32) as usize]
    }
}
