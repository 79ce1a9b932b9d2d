//! Independent restatements of the selection and placement rules.

use branchgraph::branch_points::{PointSource, TimeInterval};

/// Straightforward restatement of the placement rules.
pub fn branch_point_oracle(
    boundaries: &[f64],
    zones: &[TimeInterval],
    min: f64,
) -> Vec<(f64, PointSource)> {
    let mut cands: Vec<(f64, bool)> = Vec::new();
    for &b in boundaries {
        if b <= 0.0 {
            continue;
        }
        let mut t = b;
        let mut moved = false;
        'again: loop {
            for z in zones {
                if z.start < t && t < z.end {
                    t = z.end;
                    moved = true;
                    continue 'again;
                }
            }
            break;
        }
        cands.push((t, moved));
    }
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(f64, PointSource)> = Vec::new();
    for (t, moved) in cands {
        if let Some(last) = out.last_mut() {
            if t - last.0 <= min {
                if last.1 == PointSource::SceneCut {
                    last.1 = PointSource::Merged;
                }
                continue;
            }
        }
        out.push((
            t,
            if moved {
                PointSource::Shifted
            } else {
                PointSource::SceneCut
            },
        ));
    }
    out
}

/// Greedy selection restated directly from the definitions.
pub fn greedy_oracle(
    spa: &[Vec<f64>],
    sem: &[Vec<f64>],
    soc: &[f64],
    w: [f64; 3],
    lambda: f64,
    max_options: usize,
) -> Vec<usize> {
    let d = |set: &[usize]| {
        let mut pairs = 0.0;
        let (mut s1, mut s2) = (0.0, 0.0);
        for a in 0..set.len() {
            for b in a + 1..set.len() {
                s1 += spa[set[a]][set[b]];
                s2 += sem[set[a]][set[b]];
                pairs += 1.0;
            }
        }
        let (m1, m2) = if pairs > 0.0 {
            (s1 / pairs, s2 / pairs)
        } else {
            (0.0, 0.0)
        };
        let m3 = set.iter().map(|&i| soc[i]).sum::<f64>() / set.len() as f64;
        w[0] * m1 + w[1] * m2 + w[2] * m3
    };
    let mut first = 0;
    for i in 1..soc.len() {
        if soc[i] > soc[first] {
            first = i;
        }
    }
    let mut set = vec![first];
    while set.len() < max_options {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..soc.len() {
            if set.contains(&i) {
                continue;
            }
            let mut trial = set.clone();
            trial.push(i);
            let v = d(&trial);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        match best {
            Some((i, v)) if v >= lambda * d(&set) => set.push(i),
            _ => break,
        }
    }
    set
}
