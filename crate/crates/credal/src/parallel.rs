//! Deterministic fan-out: results depend only on the input order, never on
//! the thread count or scheduling.

/// Applies `f` to every item, possibly across `threads` workers, and returns
/// the results in input order. Work is dealt round-robin by index; each item
/// sees only its own index, so any per-item seeding stays stable when the
/// thread count changes.
pub fn indexed_map<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let threads = threads.max(1).min(items.len().max(1));
    if threads <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let mut labeled: Vec<(usize, R)> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|worker| {
                let f = &f;
                scope.spawn(move || {
                    items
                        .iter()
                        .enumerate()
                        .skip(worker)
                        .step_by(threads)
                        .map(|(i, t)| (i, f(i, t)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    labeled.sort_by_key(|(i, _)| *i);
    labeled.into_iter().map(|(_, r)| r).collect()
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_match_input_order_for_any_thread_count() {
        let items: Vec<u64> = (0..103).collect();
        let serial = indexed_map(&items, 1, |i, &x| (i as u64) * 1000 + x * x);
        for threads in [2, 3, 8, 64] {
            let parallel = indexed_map(&items, threads, |i, &x| (i as u64) * 1000 + x * x);
            assert_eq!(serial, parallel, "threads={threads}");
        }
    }

    #[test]
    fn empty_and_singleton_inputs() {
        let empty: Vec<u8> = vec![];
        assert!(indexed_map(&empty, 4, |_, &x| x).is_empty());
        assert_eq!(indexed_map(&[7u8], 4, |_, &x| x + 1), vec![8]);
    }
}
