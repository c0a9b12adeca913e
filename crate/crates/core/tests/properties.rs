//! Property tests for the format and datapath invariants.

use proptest::prelude::*;

use s2ta_core::datapath::{dp1m4, dp4m4, dp4m8, dp8_dense, dp8_zvcg};
use s2ta_core::dbb::{
    block_tensor, compress_block, decompress_block, read_tensor, unblock_tensor, write_tensor,
    DbbConfig, DenseTensor,
};
use s2ta_core::pruning::{dap_prune_block, DapArrayConfig};

/// A dense 8-block with at most `nnz` nonzeros.
fn sparse_block(nnz: usize) -> impl Strategy<Value = [i8; 8]> {
    (
        proptest::collection::vec(any::<i8>(), nnz),
        proptest::collection::vec(0usize..8, nnz),
    )
        .prop_map(|(values, positions)| {
            let mut block = [0i8; 8];
            for (v, p) in values.into_iter().zip(positions) {
                block[p] = v;
            }
            block
        })
}

fn scatter(values: &[i8], mask: u64) -> [i8; 8] {
    let mut dense = [0i8; 8];
    let mut m = mask;
    for &v in values {
        let pos = m.trailing_zeros() as usize;
        m &= m - 1;
        dense[pos] = v;
    }
    dense
}

fn dot8(a: &[i8; 8], w: &[i8; 8]) -> i32 {
    (0..8).map(|i| a[i] as i32 * w[i] as i32).sum()
}

proptest! {
    #[test]
    fn compress_round_trips_exactly(block in sparse_block(4)) {
        let cfg = DbbConfig::dbb_4_8();
        let compressed = compress_block(&block, &cfg).unwrap();
        prop_assert_eq!(compressed.mask().count_ones(), 4);
        let dense = decompress_block(&compressed, &cfg).unwrap();
        prop_assert_eq!(&dense[..], &block[..]);
    }

    #[test]
    fn blocked_tensors_round_trip(
        rows in 1usize..6,
        extent in 1usize..40,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // At most 4 nonzeros per aligned 8-block.
        let mut data = vec![0i8; rows * extent];
        for r in 0..rows {
            for start in (0..extent).step_by(8) {
                let span = 8.min(extent - start);
                for _ in 0..4usize.min(span) {
                    let j = rng.random_range(0..span);
                    data[r * extent + start + j] = rng.random();
                }
            }
        }
        let tensor = DenseTensor::new(vec![rows, extent], data).unwrap();
        let blocked = block_tensor(&tensor, 1, &DbbConfig::dbb_4_8()).unwrap();
        for b in blocked.blocks() {
            prop_assert_eq!(b.mask().count_ones(), 4);
        }
        prop_assert_eq!(unblock_tensor(&blocked).unwrap(), tensor);
    }

    #[test]
    fn serialization_round_trips(
        rows in 1usize..5,
        extent in 1usize..32,
        nnz in 1u8..=8,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<i8> = (0..rows * extent).map(|_| rng.random()).collect();
        let tensor = DenseTensor::new(vec![rows, extent], data).unwrap();
        // Prune first so any density fits the bound.
        let pruned =
            s2ta_core::pruning::prune_weight_tensor(&tensor, 1, &DbbConfig::new(8, nnz).unwrap())
                .unwrap();
        let mut bytes = Vec::new();
        write_tensor(&pruned, &mut bytes).unwrap();
        prop_assert_eq!(read_tensor(&bytes[..]).unwrap(), pruned);
    }

    #[test]
    fn dap_keeps_largest_magnitudes(block in any::<[i8; 8]>(), nnz in 1u8..=8) {
        let lib = DapArrayConfig::unrestricted(8).unwrap();
        let (pruned, ev) = dap_prune_block(&block, nnz, &lib).unwrap();
        prop_assert_eq!(pruned.mask().count_ones() as usize, nnz as usize);
        // Optimality: no discarded element outweighs a kept one.
        let kept_min = pruned
            .entries()
            .map(|(_, v)| (v as i16).unsigned_abs())
            .min()
            .unwrap();
        for (i, &v) in block.iter().enumerate() {
            if pruned.mask() >> i & 1 == 0 {
                prop_assert!((v as i16).unsigned_abs() <= kept_min);
            }
        }
        // Event law: nnz stages, 7 comparators each; dense passthrough
        // bypasses the cascade.
        let expect = if nnz == 8 { 0 } else { nnz as u64 * 7 };
        prop_assert_eq!(ev.compare_ops, expect);
    }

    #[test]
    fn dap_monotone_and_idempotent(block in any::<[i8; 8]>()) {
        let lib = DapArrayConfig::unrestricted(8).unwrap();
        let mut prev = 0u64;
        for nnz in 1..=8u8 {
            let (pruned, _) = dap_prune_block(&block, nnz, &lib).unwrap();
            prop_assert_eq!(pruned.mask() & prev, prev);
            prev = pruned.mask();
            let dense = scatter(pruned.values(), pruned.mask());
            let (again, _) = dap_prune_block(&dense, nnz, &lib).unwrap();
            prop_assert_eq!(again, pruned);
        }
    }

    #[test]
    fn datapaths_agree_with_scalar_dot(
        a_block in sparse_block(4),
        w_block in sparse_block(4),
        acc in -100_000i32..100_000,
    ) {
        let cfg = DbbConfig::dbb_4_8();
        let a = compress_block(&a_block, &cfg).unwrap();
        let w = compress_block(&w_block, &cfg).unwrap();
        let expect = acc + dot8(&a_block, &w_block);

        prop_assert_eq!(dp8_dense(&a_block, &w_block, acc).0, expect);
        prop_assert_eq!(dp8_zvcg(&a_block, &w_block, acc).0, expect);
        prop_assert_eq!(dp4m8(&a_block, &w, acc).unwrap().0, expect);
        prop_assert_eq!(dp4m4(&a, &w, acc).unwrap().0, expect);
        let (got, ev) = dp1m4(&a, &w, acc).unwrap();
        prop_assert_eq!(got, expect);
        // Time-unrolled cycle law: cycles == stored activation elements.
        prop_assert_eq!(ev.cycles, 4);
        prop_assert_eq!(ev.active_macs + ev.gated_macs, ev.cycles);
    }

    #[test]
    fn dp1m4_cycles_track_density(
        a_nnz in 1u8..=8,
        w_block in sparse_block(4),
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a_block = [0i8; 8];
        for _ in 0..a_nnz {
            a_block[rng.random_range(0..8)] = rng.random();
        }
        let a = compress_block(&a_block, &DbbConfig::new(8, a_nnz).unwrap()).unwrap();
        let w = compress_block(&w_block, &DbbConfig::dbb_4_8()).unwrap();
        let (got, ev) = dp1m4(&a, &w, 0).unwrap();
        prop_assert_eq!(got, dot8(&a_block, &w_block));
        prop_assert_eq!(ev.cycles, a_nnz as u64);
    }
}
