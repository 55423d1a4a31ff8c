// Direction numbers for dimensions 2..=16 are the first rows of the Joe & Kuo
// table `new-joe-kuo-6.21201` (https://web.maths.unsw.edu.au/~fkuo/sobol/).
// Dimension 1 is the van der Corput sequence in base 2.

const BITS: usize = 32;

pub const SOBOL_MAX_DIM: usize = 16;

/// `(s, a, m_1..m_s)` per dimension 2..=16: degree, interior polynomial
/// coefficients, initial direction numbers.
const JOE_KUO: [(u32, u32, &[u32]); SOBOL_MAX_DIM - 1] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
];

fn direction_numbers(axis: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if axis == 0 {
        for (i, x) in v.iter_mut().enumerate() {
            *x = 1 << (BITS - 1 - i);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[axis - 1];
    let s = s as usize;
    for i in 0..s.min(BITS) {
        v[i] = m[i] << (BITS - 1 - i);
    }
    for i in s..BITS {
        let mut x = v[i - s] ^ (v[i - s] >> s);
        for k in 1..s {
            if (a >> (s - 1 - k)) & 1 == 1 {
                x ^= v[i - k];
            }
        }
        v[i] = x;
    }
    v
}

/// First `n` points of the unscrambled Sobol sequence (starting at the
/// origin), gray-code ordered, row-major. Caller checks `dim <= SOBOL_MAX_DIM`.
pub(crate) fn sobol_points(n: usize, dim: usize) -> Vec<f64> {
    debug_assert!(dim <= SOBOL_MAX_DIM);
    let dirs: Vec<[u32; BITS]> = (0..dim).map(direction_numbers).collect();
    let scale = 1.0 / (1u64 << BITS) as f64;
    let mut state = vec![0u32; dim];
    let mut out = Vec::with_capacity(n * dim);
    for i in 0..n {
        out.extend(state.iter().map(|&x| x as f64 * scale));
        // flip the direction number at the lowest zero bit of i
        let c = (!i).trailing_zeros() as usize;
        if c < BITS {
            for (x, v) in state.iter_mut().zip(&dirs) {
                *x ^= v[c];
            }
        }
    }
    out
}
