//! Row-parallel helpers. Each closure call owns one output row, so the result
//! does not depend on scheduling.

/// Calls `f(row, out_row)` for every `width`-sized row of `out`.
pub(crate) fn for_each_row<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "rayon")]
    {
        use rayon::prelude::*;
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(r, row)| f(r, row));
    }
    #[cfg(not(feature = "rayon"))]
    {
        for (r, row) in out.chunks_mut(width).enumerate() {
            f(r, row);
        }
    }
}
