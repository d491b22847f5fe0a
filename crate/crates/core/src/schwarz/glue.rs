use crate::pde::ThetaField;

use super::{Partition, SchwarzError, SchwarzState};

/// Assembles one field on the full grid: slab cores are copied, and on each
/// overlap strip `[a_{p+1}, b_p]` the two slab values are blended linearly in
/// `x_n`, weight 0 at `a_{p+1}` rising to 1 at `b_p`.
pub fn glue(state: &SchwarzState, partition: &Partition) -> Result<ThetaField, SchwarzError> {
    let count = partition.count();
    if state.fields.len() != count {
        return Err(SchwarzError::StateMismatch(format!(
            "{} subdomain fields for {count} subdomains",
            state.fields.len()
        )));
    }
    let full = partition.grid();
    let m = state.fields[0].m();
    let subs = partition.subdomains();
    for (p, f) in state.fields.iter().enumerate() {
        if *f.grid() != partition.subgrid(p) || f.m() != m {
            return Err(SchwarzError::StateMismatch(format!("field {} does not live on its slab", p + 1)));
        }
    }
    let along = full.nx();
    let cross = full.cross_section_len();
    let mut out = ThetaField::zeros(full.clone(), m);

    // Each global index j is owned by slab `owner` and, on a strip, blended
    // towards slab `owner + 1` with weight `w`.
    let mut owner = 0usize;
    for j in 0..along {
        while owner + 1 < count && j > subs[owner].hi_index {
            owner += 1;
        }
        // After the loop `owner` is the first slab containing j.
        let blend = (owner + 1 < count && j >= subs[owner + 1].lo_index).then(|| {
            let (lo, hi) = (subs[owner + 1].lo_index, subs[owner].hi_index);
            (j - lo) as f64 / (hi - lo) as f64
        });
        for level in 0..full.nt() {
            let dst = out.level_mut(level);
            for c in 0..cross {
                let node = c * along + j;
                let src = state.fields[owner].at(level, c * subs_len(subs, owner) + j - subs[owner].lo_index);
                let cell = &mut dst[node * m..(node + 1) * m];
                match blend {
                    None => cell.copy_from_slice(src),
                    Some(w) => {
                        let next = state.fields[owner + 1]
                            .at(level, c * subs_len(subs, owner + 1) + j - subs[owner + 1].lo_index);
                        for k in 0..m {
                            cell[k] = src[k] + w * (next[k] - src[k]);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn subs_len(subs: &[super::Subdomain], p: usize) -> usize {
    subs[p].hi_index - subs[p].lo_index + 1
}
