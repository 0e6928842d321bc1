//! Independent reference implementations used to cross-check the library.
//! Deliberately written from the loop equations alone, without reusing any
//! library code paths.

/// Brute-force second-order CIFB modulator: explicit difference equations,
/// naive clipping, quantizer with the zero -> +1 tie-break, one-sample DAC
/// delay starting from v = +1.
#[allow(dead_code)]
pub fn reference_modulator(
    input: &[f64],
    a1: f64,
    a2: f64,
    v_ref: f64,
    rail: f64,
) -> Vec<i8> {
    let mut i1 = 0.0f64;
    let mut i2 = 0.0f64;
    let mut v = 1.0f64;
    let mut out = Vec::with_capacity(input.len());
    for &u in input {
        let mut x1 = i1 + a1 * (u - v * v_ref);
        if x1 > rail {
            x1 = rail;
        }
        if x1 < -rail {
            x1 = -rail;
        }
        let mut x2 = i2 + a2 * (x1 - v * v_ref);
        if x2 > rail {
            x2 = rail;
        }
        if x2 < -rail {
            x2 = -rail;
        }
        let bit: i8 = if x2 >= 0.0 { 1 } else { -1 };
        i1 = x1;
        i2 = x2;
        v = bit as f64;
        out.push(bit);
    }
    out
}

/// Closed-form impulse response of an R-fold sinc^order filter: `order`
/// boxcars of length R convolved together, evaluated by direct counting.
#[allow(dead_code)]
pub fn boxcar_convolution(r: usize, order: usize) -> Vec<f64> {
    let mut h = vec![1.0f64; r];
    for _ in 1..order {
        let mut next = vec![0.0f64; h.len() + r - 1];
        for (i, &a) in h.iter().enumerate() {
            for j in 0..r {
                next[i + j] += a;
            }
        }
        h = next;
    }
    h
}
