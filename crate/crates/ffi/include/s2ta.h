/* C ABI over the DBB format and the S2TA array simulator.
 *
 * Conventions:
 *  - Fallible calls return int32_t: S2TA_OK (0) or a negative S2TA_ERR_*
 *    code; the matching message is per-thread, see s2ta_last_error_message.
 *  - S2taArrayConfig is an opaque handle (s2ta_config_reference /
 *    s2ta_config_load, released with s2ta_config_free).
 *  - Strings returned through char** are owned by the library; release
 *    them with s2ta_string_free.
 *
 * Kept in sync with src/lib.rs (cbindgen layout; see cbindgen.toml).
 */

#ifndef S2TA_H
#define S2TA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define S2TA_OK 0

#define S2TA_ERR_DATA -1

#define S2TA_ERR_IO -2

#define S2TA_ERR_CONFIG -3

#define S2TA_ERR_WORKLOAD -4

#define S2TA_ERR_NULL_ARGUMENT -5

#define S2TA_ERR_UTF8 -6

#define S2TA_ERR_PANIC -7

/**
 * Opaque accelerator instance handle.
 */
typedef struct S2taArrayConfig S2taArrayConfig;

#ifdef __cplusplus
extern "C" {
#endif /* __cplusplus */

/**
 * Library version string (static, do not free).
 */
const char *s2ta_version(void);

/**
 * Copy the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length in
 * bytes excluding the NUL, or 0 when no error is recorded.
 */
size_t s2ta_last_error_message(char *buf, size_t len);

/**
 * Serialized bytes per DBB block (`nnz` values plus the bitmask), or a
 * negative status on an invalid geometry.
 */
int32_t s2ta_storage_bytes_per_block(uint8_t block_size, uint8_t nnz);

/**
 * Losslessly compress one dense block of `block_size` signed bytes.
 * Writes exactly `nnz` values to `out_values` and the positional bitmask
 * (bit 0 = position 0) to `out_mask`.
 */
int32_t s2ta_compress_block(const int8_t *dense,
                            uint8_t block_size,
                            uint8_t nnz,
                            int8_t *out_values,
                            uint64_t *out_mask);

/**
 * Scatter a compressed block back to `block_size` dense bytes.
 */
int32_t s2ta_decompress_block(const int8_t *values,
                              uint8_t nnz,
                              uint64_t mask,
                              uint8_t block_size,
                              int8_t *out_dense);

/**
 * Top-NNZ magnitude pruning of one dense block through the cascaded
 * maxpool model. `max_stages` caps the runtime NNZ (5 in the reference
 * design; pass `block_size` for library mode). Reports the comparator
 * work in `out_compare_ops` when non-null.
 */
int32_t s2ta_dap_prune_block(const int8_t *dense,
                             uint8_t block_size,
                             uint8_t nnz,
                             uint8_t max_stages,
                             int8_t *out_values,
                             uint64_t *out_mask,
                             uint64_t *out_compare_ops);

/**
 * Reference instance for a mode name (`"sa"`, `"sa-zvcg"`, `"s2ta-w"`,
 * `"s2ta-aw"`). Returns null on error.
 */
struct S2taArrayConfig *s2ta_config_reference(const char *mode);

/**
 * Load an instance from a key-value config file. Returns null on error.
 */
struct S2taArrayConfig *s2ta_config_load(const char *path);

/**
 * Release a config handle. Null is a no-op.
 */
void s2ta_config_free(struct S2taArrayConfig *cfg);

/**
 * Physical INT8 MAC count of an instance, or a negative status.
 */
int64_t s2ta_physical_macs(const struct S2taArrayConfig *cfg);

/**
 * Per-MAC PE buffer account: operand register bytes, accumulator bytes
 * and their sum. `out_flagged` is set to 1 when the published figures for
 * this design point are known not to follow from its geometry.
 */
int32_t s2ta_buffer_account(const struct S2taArrayConfig *cfg,
                            double *out_operand_bytes,
                            double *out_accumulator_bytes,
                            double *out_total_bytes,
                            int32_t *out_flagged);

/**
 * Simulate a built-in network (`"alexnet"`, `"vgg16"`, `"mobilenetv1"`,
 * `"resnet50v1"`) with the embedded coefficient table; the JSON report is
 * returned through `out_report_json` (release with s2ta_string_free).
 */
int32_t s2ta_simulate_builtin(const struct S2taArrayConfig *cfg,
                              const char *name,
                              uint64_t seed,
                              char **out_report_json);

/**
 * Simulate a network described by a JSON file.
 */
int32_t s2ta_simulate_network_file(const struct S2taArrayConfig *cfg,
                                   const char *path,
                                   uint64_t seed,
                                   char **out_report_json);

/**
 * Release a string returned by this library. Null is a no-op.
 */
void s2ta_string_free(char *s);

#ifdef __cplusplus
}  /* extern "C" */
#endif /* __cplusplus */

#endif /* S2TA_H */
