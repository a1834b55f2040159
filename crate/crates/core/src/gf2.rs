//! Bit-packed linear algebra over GF(2).

/// Number of 64-bit words needed for `bits` bits.
#[inline]
pub fn words_for(bits: usize) -> usize {
    bits.div_ceil(64)
}

#[inline]
pub fn get_bit(words: &[u64], i: usize) -> bool {
    (words[i / 64] >> (i % 64)) & 1 == 1
}

#[inline]
pub fn set_bit(words: &mut [u64], i: usize, value: bool) {
    let mask = 1u64 << (i % 64);
    if value {
        words[i / 64] |= mask;
    } else {
        words[i / 64] &= !mask;
    }
}

/// Parity of `a & b`.
#[inline]
pub fn dot(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).fold(0u32, |acc, (x, y)| acc ^ (x & y).count_ones()) & 1 == 1
}

/// In-place transpose of a 64x64 bit block, bit `c` of word `r` holding
/// entry `(r, c)`.
pub fn transpose64(a: &mut [u64; 64]) {
    let mut j = 32;
    let mut m: u64 = 0x0000_0000_FFFF_FFFF;
    while j != 0 {
        let mut k = 0;
        while k < 64 {
            let t = ((a[k] >> j) ^ a[k + j]) & m;
            a[k] ^= t << j;
            a[k + j] ^= t;
            k = (k + j + 1) & !j;
        }
        j >>= 1;
        m ^= m << j;
    }
}

/// Columns eliminated per pass over the matrix.
const BLOCK: usize = 8;

/// Solves `A x = b` for `x` in GF(2)^n, where each row of `A` is given as
/// packed bits `0..n` with the right-hand side stored at bit `n`.
///
/// Returns the solution only when `A` has full column rank `n` and the system
/// is consistent; `None` otherwise.
///
/// Elimination works on blocks of eight columns: pivots for the block are
/// found and made unit on the block, every other row is then cleared with a
/// single lookup in a table of all pivot-row combinations. This trades one
/// pass over the matrix per column for one pass per block.
pub fn solve_augmented(rows: Vec<Vec<u64>>, n: usize) -> Option<Vec<u64>> {
    let m = rows.len();
    if m < n {
        return None;
    }
    let stride = words_for(n + 1);
    let mut a = Vec::with_capacity(m * stride);
    for r in &rows {
        a.extend((0..stride).map(|i| r.get(i).copied().unwrap_or(0)));
    }
    drop(rows);

    let mut table = vec![0u64; (1 << BLOCK) * stride];
    let mut col = 0;
    while col < n {
        let kb = BLOCK.min(n - col);
        let w0 = col / 64;
        // rows rank..rank+j hold the block pivots found so far
        let rank = col;
        for j in 0..kb {
            let c = col + j;
            let mut found = None;
            for r in rank + j..m {
                for p in 0..j {
                    if bit_at(&a, stride, r, col + p) {
                        xor_rows(&mut a, stride, r, rank + p, w0);
                    }
                }
                if bit_at(&a, stride, r, c) {
                    found = Some(r);
                    break;
                }
            }
            let pivot = found?;
            swap_rows(&mut a, stride, rank + j, pivot);
        }
        // make the pivots unit vectors on the block columns
        for j in (0..kb).rev() {
            for q in 0..j {
                if bit_at(&a, stride, rank + q, col + j) {
                    xor_rows(&mut a, stride, rank + q, rank + j, w0);
                }
            }
        }
        let width = stride - w0;
        for mask in 1..1usize << kb {
            let low = mask.trailing_zeros() as usize;
            let (prev, src) = (mask & (mask - 1), (rank + low) * stride + w0);
            for i in 0..width {
                table[mask * stride + i] = table[prev * stride + i] ^ a[src + i];
            }
        }
        let block_mask = (1u64 << kb) - 1;
        for r in rank + kb..m {
            let row = &mut a[r * stride..(r + 1) * stride];
            let sel = (extract(row, col) & block_mask) as usize;
            if sel != 0 {
                let t = &table[sel * stride..sel * stride + width];
                for (x, y) in row[w0..].iter_mut().zip(t) {
                    *x ^= y;
                }
            }
        }
        col += kb;
    }
    // rows past the pivots reduce to 0 = rhs; a set rhs bit is a contradiction
    if (n..m).any(|r| bit_at(&a, stride, r, n)) {
        return None;
    }
    let mut x = vec![0u64; words_for(n)];
    for col in (0..n).rev() {
        let row = &a[col * stride..(col + 1) * stride];
        // row has leading one at `col`; the remaining known bits are > col
        let mut acc = get_bit(row, n);
        let w = col / 64;
        for (i, (r, s)) in row[w..].iter().zip(&x[w..]).enumerate() {
            let mut m = r & s;
            if i == 0 {
                m &= !((1u64 << (col % 64)) | ((1u64 << (col % 64)) - 1));
            }
            acc ^= m.count_ones() & 1 == 1;
        }
        set_bit(&mut x, col, acc);
    }
    Some(x)
}

#[inline]
fn bit_at(a: &[u64], stride: usize, r: usize, c: usize) -> bool {
    (a[r * stride + c / 64] >> (c % 64)) & 1 == 1
}

/// `row[dst] ^= row[src]` from word `from` on.
#[inline]
fn xor_rows(a: &mut [u64], stride: usize, dst: usize, src: usize, from: usize) {
    debug_assert_ne!(dst, src);
    for i in from..stride {
        a[dst * stride + i] ^= a[src * stride + i];
    }
}

fn swap_rows(a: &mut [u64], stride: usize, r1: usize, r2: usize) {
    if r1 != r2 {
        let (lo, hi) = (r1.min(r2), r1.max(r2));
        let (head, tail) = a.split_at_mut(hi * stride);
        head[lo * stride..(lo + 1) * stride].swap_with_slice(&mut tail[..stride]);
    }
}

/// The 64 bits of `row` starting at bit `c`.
#[inline]
fn extract(row: &[u64], c: usize) -> u64 {
    let (w, o) = (c / 64, c % 64);
    let mut v = row[w] >> o;
    if o != 0 && w + 1 < row.len() {
        v |= row[w + 1] << (64 - o);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(bits: &[u8]) -> Vec<u64> {
        let mut w = vec![0u64; words_for(bits.len())];
        for (i, &b) in bits.iter().enumerate() {
            set_bit(&mut w, i, b == 1);
        }
        w
    }

    #[test]
    fn solves_small_system() {
        // x0 + x1 = 1, x1 = 1, x0 = 0
        let rows = vec![row(&[1, 1, 1]), row(&[0, 1, 1]), row(&[1, 0, 0])];
        let x = solve_augmented(rows, 2).unwrap();
        assert!(!get_bit(&x, 0) && get_bit(&x, 1));
    }

    #[test]
    fn detects_rank_deficiency_and_contradiction() {
        assert!(solve_augmented(vec![row(&[1, 1, 0]), row(&[1, 1, 0])], 2).is_none());
        assert!(solve_augmented(vec![row(&[1, 0, 0]), row(&[0, 1, 0]), row(&[1, 1, 1])], 2).is_none());
        assert!(solve_augmented(vec![row(&[1, 0])], 2).is_none());
    }

    #[test]
    fn solves_across_word_boundaries() {
        // lower-triangular system with 130 unknowns and a known solution
        let n = 130;
        let truth: Vec<bool> = (0..n).map(|i| (i * 7 + 3) % 5 < 2).collect();
        let mut rows = Vec::new();
        for i in 0..n {
            let mut r = vec![0u64; words_for(n + 1)];
            for j in 0..=i {
                if j == i || (i + j) % 3 == 0 {
                    set_bit(&mut r, j, true);
                }
            }
            let rhs = (0..n).filter(|&j| get_bit(&r, j) && truth[j]).count() % 2 == 1;
            set_bit(&mut r, n, rhs);
            rows.push(r);
        }
        rows.reverse();
        let x = solve_augmented(rows, n).unwrap();
        assert!((0..n).all(|i| get_bit(&x, i) == truth[i]));
    }

    fn naive_rank(rows: &[Vec<u64>], n: usize) -> usize {
        let mut rows = rows.to_vec();
        let mut rank = 0;
        for c in 0..n {
            let Some(p) = (rank..rows.len()).find(|&r| get_bit(&rows[r], c)) else { continue };
            rows.swap(rank, p);
            for r in 0..rows.len() {
                if r != rank && get_bit(&rows[r], c) {
                    let pr = rows[rank].clone();
                    for (x, y) in rows[r].iter_mut().zip(&pr) {
                        *x ^= y;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    proptest! {
        #[test]
        fn agrees_with_naive_elimination(n in 1usize..150, extra in 0usize..40, seed in any::<u64>(), consistent in any::<bool>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = n + extra;
            let w = words_for(n + 1);
            let truth: Vec<u64> = (0..words_for(n)).map(|_| rng.gen::<u64>()).collect();
            let truth: Vec<u64> = { let mut t = vec![0u64; truth.len()]; for i in 0..n { set_bit(&mut t, i, get_bit(&truth, i)); } t };
            // sparse-ish rows so that rank deficiency actually happens
            let density = rng.gen_range(0.02..0.6);
            let mut rows = Vec::with_capacity(m);
            for _ in 0..m {
                let mut r = vec![0u64; w];
                for i in 0..n {
                    set_bit(&mut r, i, rng.gen_bool(density));
                }
                let rhs = dot(&r[..truth.len()], &truth);
                set_bit(&mut r, n, rhs ^ (!consistent && rng.gen_bool(0.3)));
                rows.push(r);
            }
            let coeff: Vec<Vec<u64>> = rows.iter().map(|r| { let mut c = r.clone(); set_bit(&mut c, n, false); c }).collect();
            let full_rank = naive_rank(&coeff, n) == n;
            let augmented_rank = naive_rank(&rows, n + 1);
            match solve_augmented(rows.clone(), n) {
                Some(x) => {
                    prop_assert!(full_rank);
                    for r in &rows {
                        prop_assert_eq!(dot(&r[..x.len()], &x), get_bit(r, n));
                    }
                    if consistent {
                        prop_assert_eq!(x, truth);
                    }
                }
                None => prop_assert!(!full_rank || augmented_rank > n),
            }
        }
    }

    #[test]
    fn transpose_matches_naive() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let orig: [u64; 64] = std::array::from_fn(|_| rng.gen());
        let mut t = orig;
        transpose64(&mut t);
        for r in 0..64 {
            for c in 0..64 {
                assert_eq!((t[c] >> r) & 1, (orig[r] >> c) & 1);
            }
        }
        transpose64(&mut t);
        assert_eq!(t, orig);
    }

    #[test]
    fn dot_is_parity_of_and() {
        assert!(dot(&[0b1011], &[0b0001]));
        assert!(!dot(&[0b1011], &[0b1001]));
    }
}
