//! Exact statevector simulation of the two-layer ion-trap-native ansatz.
//!
//! Angles are in half-turn units: a gate with generator `G` applies
//! `exp(-i G theta pi/2)`. Layer one is a per-qubit X rotation followed by a
//! Z rotation; layer two applies Molmer-Sorensen XX rotations on every qubit
//! pair. Qubit 0 is the leftmost character of the printed bitstring and the
//! most significant bit of the state index, matching the asset encoding used
//! for the target distributions.

use nalgebra::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Parameters of the two-layer ansatz on `n` qubits: `n` X angles, `n` Z
/// angles, and `n(n-1)/2` XX angles in pair order
/// (0,1),(0,2),...,(0,n-1),(1,2),...,(n-2,n-1).
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitParams {
    pub x_angles: Vec<f64>,
    pub z_angles: Vec<f64>,
    pub xx_angles: Vec<f64>,
}

/// Normalized state of `n` qubits as `2^n` complex amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<C64>,
}

/// Total parameter count of the ansatz: n(n+3)/2.
pub fn param_count(n: usize) -> usize {
    n * (n + 3) / 2
}

/// Qubit-pair order used for the XX layer.
pub fn pair_order(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    pairs
}

impl CircuitParams {
    pub fn new(x_angles: Vec<f64>, z_angles: Vec<f64>, xx_angles: Vec<f64>) -> Result<Self> {
        let n = x_angles.len();
        if z_angles.len() != n || xx_angles.len() != n * (n.saturating_sub(1)) / 2 {
            return Err(Error::Size(format!(
                "angle counts {}/{}/{} inconsistent for n = {n}",
                x_angles.len(),
                z_angles.len(),
                xx_angles.len()
            )));
        }
        Ok(Self {
            x_angles,
            z_angles,
            xx_angles,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.x_angles.len()
    }

    /// Flat layout: x angles, z angles, then xx angles in pair order.
    pub fn from_flat(n: usize, flat: &[f64]) -> Result<Self> {
        if flat.len() != param_count(n) {
            return Err(Error::Size(format!(
                "expected {} parameters for n = {n}, got {}",
                param_count(n),
                flat.len()
            )));
        }
        Ok(Self {
            x_angles: flat[..n].to_vec(),
            z_angles: flat[n..2 * n].to_vec(),
            xx_angles: flat[2 * n..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = self.x_angles.clone();
        flat.extend_from_slice(&self.z_angles);
        flat.extend_from_slice(&self.xx_angles);
        flat
    }
}

impl StateVector {
    /// The all-zeros computational basis state.
    pub fn zero(n: usize) -> Self {
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n];
        amps[0] = C64::new(1.0, 0.0);
        Self { n, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n - 1 - qubit)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.n {
            return Err(Error::Index(format!(
                "qubit {qubit} out of range for {} qubits",
                self.n
            )));
        }
        Ok(())
    }

    /// X rotation exp(-i sigma_x theta pi/2) on one qubit.
    pub fn apply_rx(&mut self, qubit: usize, theta: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        let half = theta * std::f64::consts::FRAC_PI_2;
        let c = half.cos();
        let ms = C64::new(0.0, -half.sin());
        let m = self.mask(qubit);
        for base in (0..self.amps.len()).step_by(m << 1) {
            for i0 in base..base + m {
                let a0 = self.amps[i0];
                let a1 = self.amps[i0 + m];
                self.amps[i0] = c * a0 + ms * a1;
                self.amps[i0 + m] = ms * a0 + c * a1;
            }
        }
        Ok(())
    }

    /// Z rotation exp(-i sigma_z theta pi/2): phases e^{-i theta pi/2} and
    /// e^{+i theta pi/2} on the 0 and 1 components.
    pub fn apply_rz(&mut self, qubit: usize, theta: f64) -> Result<()> {
        self.check_qubit(qubit)?;
        let half = theta * std::f64::consts::FRAC_PI_2;
        let p0 = C64::new(half.cos(), -half.sin());
        let p1 = C64::new(half.cos(), half.sin());
        let m = self.mask(qubit);
        for base in (0..self.amps.len()).step_by(m << 1) {
            for idx in base..base + m {
                self.amps[idx] *= p0;
                self.amps[idx + m] *= p1;
            }
        }
        Ok(())
    }

    /// Molmer-Sorensen XX rotation exp(-i sigma_x sigma_x chi pi/2) on a
    /// qubit pair: cos I - i sin (X (x) X).
    pub fn apply_xx(&mut self, i: usize, j: usize, chi: f64) -> Result<()> {
        self.check_qubit(i)?;
        self.check_qubit(j)?;
        if i == j {
            return Err(Error::Index(format!("xx gate needs distinct qubits, got {i}")));
        }
        let half = chi * std::f64::consts::FRAC_PI_2;
        let c = half.cos();
        let ms = C64::new(0.0, -half.sin());
        let both = self.mask(i) | self.mask(j);
        let m_hi = self.mask(i.min(j));
        // Indices with the high bit clear pair off with idx ^ both exactly
        // once, covering both the (00,11) and (01,10) couplings.
        for base in (0..self.amps.len()).step_by(m_hi << 1) {
            for idx in base..base + m_hi {
                let partner = idx ^ both;
                let a = self.amps[idx];
                let b = self.amps[partner];
                self.amps[idx] = c * a + ms * b;
                self.amps[partner] = ms * a + c * b;
            }
        }
        Ok(())
    }

    /// Born probabilities |a_x|^2.
    pub fn born_probs(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Run the two-layer ansatz from |0...0>: per-qubit X then Z rotations,
/// then all XX gates in the fixed pair order (they commute, so the order
/// does not affect the state beyond rounding).
pub fn run_ansatz(params: &CircuitParams, n: usize) -> Result<StateVector> {
    if params.n_qubits() != n {
        return Err(Error::Size(format!(
            "parameters sized for {} qubits, asked for {n}",
            params.n_qubits()
        )));
    }
    let mut sv = StateVector::zero(n);
    for q in 0..n {
        sv.apply_rx(q, params.x_angles[q])?;
        sv.apply_rz(q, params.z_angles[q])?;
    }
    for ((i, j), &chi) in pair_order(n).into_iter().zip(&params.xx_angles) {
        sv.apply_xx(i, j, chi)?;
    }
    Ok(sv)
}

/// Born distribution of the ansatz for a flat parameter vector.
pub fn born_probs_flat(n: usize, flat: &[f64]) -> Result<Vec<f64>> {
    let params = CircuitParams::from_flat(n, flat)?;
    Ok(run_ansatz(&params, n)?.born_probs())
}
