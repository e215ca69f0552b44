//! Small statistics helpers for trend checks.

/// Average ranks with ties sharing the mean rank.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with tie correction; 0 when either series is
/// constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Median of a slice; the mean of the middle pair for even lengths.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spearman_detects_monotone_trends() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let up = [0.1, 0.5, 0.6, 2.0, 9.0];
        let down = [9.0, 2.0, 0.6, 0.5, 0.1];
        assert_relative_eq!(spearman(&x, &up), 1.0, max_relative = 1e-12);
        assert_relative_eq!(spearman(&x, &down), -1.0, max_relative = 1e-12);
        assert_eq!(spearman(&x, &[3.0; 5]), 0.0);
    }

    #[test]
    fn spearman_handles_ties() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [5.0, 5.0, 2.0, 1.0];
        let rho = spearman(&x, &y);
        assert!(rho < 0.0 && rho > -1.0 - 1e-12);
    }

    #[test]
    fn median_fixtures() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[7.0]), 7.0);
    }
}
