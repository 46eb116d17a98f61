//! Order-preserving map over independent work items.
//!
//! With the `parallel` feature the items run on a rayon pool and results are
//! handed to the sink in input order as soon as each prefix is complete.
//! Without it, or with [`Execution::Sequential`], items run one by one.

/// How independent work items are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// `threads == 0` uses the global rayon pool.
    Parallel {
        threads: usize,
    },
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel { threads: 0 }
    }
}

impl Execution {
    pub fn threads(threads: usize) -> Self {
        if threads == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { threads }
        }
    }
}

/// Applies `f` to every item and feeds `(index, result)` to `sink` in index
/// order. A sink error stops the run; items already started still finish.
pub fn for_each_ordered<T, R, E, F, S>(items: &[T], exec: Execution, f: F, mut sink: S) -> Result<(), E>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
    S: FnMut(usize, R) -> Result<(), E>,
{
    match exec {
        Execution::Sequential => sequential(items, &f, &mut sink),
        Execution::Parallel { threads } => parallel(items, threads, &f, &mut sink),
    }
}

/// Collects results in input order.
pub fn map_ordered<T, R, F>(items: &[T], exec: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let mut out = Vec::with_capacity(items.len());
    let _ = for_each_ordered(items, exec, f, |_, r| {
        out.push(r);
        Ok::<(), std::convert::Infallible>(())
    });
    out
}

fn sequential<T, R, E>(
    items: &[T],
    f: &(impl Fn(usize, &T) -> R + Sync),
    sink: &mut impl FnMut(usize, R) -> Result<(), E>,
) -> Result<(), E> {
    for (i, item) in items.iter().enumerate() {
        sink(i, f(i, item))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn parallel<T, R, E>(
    items: &[T],
    _threads: usize,
    f: &(impl Fn(usize, &T) -> R + Sync),
    sink: &mut impl FnMut(usize, R) -> Result<(), E>,
) -> Result<(), E> {
    sequential(items, f, sink)
}

#[cfg(feature = "parallel")]
fn parallel<T, R, E>(
    items: &[T],
    threads: usize,
    f: &(impl Fn(usize, &T) -> R + Sync),
    sink: &mut impl FnMut(usize, R) -> Result<(), E>,
) -> Result<(), E>
where
    T: Sync,
    R: Send,
{
    use rayon::prelude::*;
    use std::collections::BTreeMap;
    use std::sync::atomic::{AtomicBool, Ordering};
    use std::sync::mpsc;

    let pool = if threads > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(p) => Some(p),
            Err(_) => return sequential(items, f, sink),
        }
    } else {
        None
    };
    let cancelled = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<(usize, R)>();

    std::thread::scope(|scope| {
        let cancelled = &cancelled;
        scope.spawn(move || {
            let work = || {
                items.par_iter().enumerate().for_each_with(tx, |tx, (i, item)| {
                    if !cancelled.load(Ordering::Relaxed) {
                        let _ = tx.send((i, f(i, item)));
                    }
                })
            };
            match &pool {
                Some(p) => p.install(work),
                None => work(),
            }
        });

        let mut pending = BTreeMap::new();
        let mut next = 0usize;
        for (i, r) in rx {
            pending.insert(i, r);
            while let Some(r) = pending.remove(&next) {
                if let Err(e) = sink(next, r) {
                    cancelled.store(true, Ordering::Relaxed);
                    return Err(e);
                }
                next += 1;
            }
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_preserve_order() {
        let items: Vec<u64> = (0..200).collect();
        let work = |i: usize, x: &u64| {
            // uneven cost so completion order differs from input order
            let spin = (200 - i) * 50;
            (0..spin as u64).fold(*x, |a, b| a.wrapping_mul(31).wrapping_add(b))
        };
        let seq = map_ordered(&items, Execution::Sequential, work);
        let par = map_ordered(&items, Execution::Parallel { threads: 4 }, work);
        assert_eq!(seq, par);
        let mut seen = Vec::new();
        for_each_ordered(&items, Execution::Parallel { threads: 3 }, work, |i, _| {
            seen.push(i);
            Ok::<(), ()>(())
        })
        .unwrap();
        assert_eq!(seen, (0..200).collect::<Vec<_>>());
    }

    #[test]
    fn sink_error_stops_the_run() {
        let items: Vec<u32> = (0..50).collect();
        let mut count = 0;
        let res = for_each_ordered(
            &items,
            Execution::default(),
            |_, x| *x,
            |i, _| {
                count += 1;
                if i == 9 {
                    Err("stop")
                } else {
                    Ok(())
                }
            },
        );
        assert_eq!(res, Err("stop"));
        assert_eq!(count, 10);
    }

    #[test]
    fn single_thread_means_sequential() {
        assert_eq!(Execution::threads(1), Execution::Sequential);
        assert_eq!(Execution::threads(4), Execution::Parallel { threads: 4 });
    }
}
