//! Mixed volume by inclusion–exclusion over Minkowski sums,
//! `MV(P_1..P_n) = Σ_S (−1)^{n−|S|} vol(Σ_{i∈S} P_i)`, with exact integer
//! hull volumes in dimensions 1 to 3. Shares no code with the library.

use std::collections::{BTreeMap, BTreeSet};

type P = Vec<i64>;

fn minkowski(a: &BTreeSet<P>, b: &BTreeSet<P>) -> BTreeSet<P> {
    a.iter()
        .flat_map(|x| b.iter().map(move |y| x.iter().zip(y).map(|(u, v)| u + v).collect()))
        .collect()
}

fn cross2(o: &[i64], a: &[i64], b: &[i64]) -> i128 {
    (a[0] - o[0]) as i128 * (b[1] - o[1]) as i128 - (a[1] - o[1]) as i128 * (b[0] - o[0]) as i128
}

/// Convex hull in counter-clockwise order (monotone chain), collinear
/// points dropped.
fn hull2(points: &[[i64; 2]]) -> Vec<[i64; 2]> {
    let mut pts: Vec<[i64; 2]> = points.to_vec();
    pts.sort();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[i64; 2]> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross2(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<[i64; 2]> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross2(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn twice_area(points: &[[i64; 2]]) -> i128 {
    let h = hull2(points);
    if h.len() < 3 {
        return 0;
    }
    (1..h.len() - 1).map(|i| cross2(&h[0], &h[i], &h[i + 1])).sum::<i128>().abs()
}

fn sub3(a: &[i64], b: &[i64]) -> [i128; 3] {
    [(a[0] - b[0]) as i128, (a[1] - b[1]) as i128, (a[2] - b[2]) as i128]
}

fn cross3(u: [i128; 3], v: [i128; 3]) -> [i128; 3] {
    [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
}

fn dot3(u: [i128; 3], v: [i128; 3]) -> i128 {
    u[0] * v[0] + u[1] * v[1] + u[2] * v[2]
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Six times the hull volume: facets found by brute force over triples,
/// each coned to a point of the set.
fn six_volume(points: &[P]) -> i128 {
    let n = points.len();
    let p0 = &points[0];
    let mut facets: BTreeMap<([i128; 3], i128), ()> = BTreeMap::new();
    let mut total = 0i128;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (&points[i], &points[j], &points[k]);
                let mut nrm = cross3(sub3(b, a), sub3(c, a));
                if nrm == [0, 0, 0] {
                    continue;
                }
                let side: Vec<i128> = points.iter().map(|p| dot3(nrm, sub3(p, a))).collect();
                let pos = side.iter().any(|&s| s > 0);
                let neg = side.iter().any(|&s| s < 0);
                if pos && neg {
                    continue;
                }
                if !pos && !neg {
                    // everything coplanar
                    return 0;
                }
                if pos {
                    nrm = [-nrm[0], -nrm[1], -nrm[2]];
                }
                let g = gcd(gcd(nrm[0], nrm[1]), nrm[2]);
                let nrm = [nrm[0] / g, nrm[1] / g, nrm[2] / g];
                let offset = dot3(nrm, [a[0] as i128, a[1] as i128, a[2] as i128]);
                if facets.insert((nrm, offset), ()).is_some() {
                    continue;
                }
                let on: Vec<&P> = points
                    .iter()
                    .filter(|p| dot3(nrm, [p[0] as i128, p[1] as i128, p[2] as i128]) == offset)
                    .collect();
                // drop the coordinate with the largest normal component
                let drop = (0..3).max_by_key(|&t| nrm[t].abs()).unwrap();
                let keep: Vec<usize> = (0..3).filter(|&t| t != drop).collect();
                let flat: Vec<[i64; 2]> = on.iter().map(|p| [p[keep[0]], p[keep[1]]]).collect();
                let h = hull2(&flat);
                let lift = |q: &[i64; 2]| -> &P {
                    on.iter().find(|p| p[keep[0]] == q[0] && p[keep[1]] == q[1]).unwrap()
                };
                for t in 1..h.len().saturating_sub(1) {
                    let (u, v, w) = (lift(&h[0]), lift(&h[t]), lift(&h[t + 1]));
                    total += dot3(sub3(u, p0), cross3(sub3(v, p0), sub3(w, p0))).abs();
                }
            }
        }
    }
    total
}

/// `n! · vol_n(conv(points))` for `n ≤ 3`.
fn scaled_volume(points: &BTreeSet<P>, n: usize) -> i128 {
    let pts: Vec<P> = points.iter().cloned().collect();
    match n {
        1 => {
            let lo = pts.iter().map(|p| p[0]).min().unwrap();
            let hi = pts.iter().map(|p| p[0]).max().unwrap();
            (hi - lo) as i128
        }
        2 => twice_area(&pts.iter().map(|p| [p[0], p[1]]).collect::<Vec<_>>()),
        3 => six_volume(&pts),
        _ => panic!("oracle covers dimensions 1 to 3"),
    }
}

/// Mixed volume of `supports` (each a nonempty point list in `Z^n`, `n ≤ 3`).
pub fn mixed_volume_oracle(supports: &[Vec<Vec<i64>>]) -> i128 {
    let n = supports.len();
    let sets: Vec<BTreeSet<P>> = supports.iter().map(|s| s.iter().cloned().collect()).collect();
    let mut acc = 0i128;
    for mask in 1u32..(1 << n) {
        let mut sum: Option<BTreeSet<P>> = None;
        for (i, s) in sets.iter().enumerate() {
            if mask >> i & 1 == 1 {
                sum = Some(match sum {
                    None => s.clone(),
                    Some(t) => minkowski(&t, s),
                });
            }
        }
        let v = scaled_volume(&sum.unwrap(), n);
        let sign = if (n - mask.count_ones() as usize) % 2 == 0 { 1 } else { -1 };
        acc += sign * v;
    }
    let fact: i128 = (1..=n as i128).product();
    assert!(acc % fact == 0, "inclusion-exclusion gave a non-integer");
    acc / fact
}
