#ifndef NNVERIF_H
#define NNVERIF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

typedef enum NnvStatus {
  NNV_STATUS_OK = 0,
  NNV_STATUS_NULL_POINTER = 1,
  NNV_STATUS_INVALID_UTF8 = 2,
  NNV_STATUS_PARSE = 3,
  NNV_STATUS_INVALID_ARGUMENT = 4,
  NNV_STATUS_DIMENSION = 5,
  NNV_STATUS_BUFFER_TOO_SMALL = 6,
  NNV_STATUS_IO = 7,
  NNV_STATUS_NUMERIC = 8,
  NNV_STATUS_PANIC = 9,
} NnvStatus;

typedef enum NnvConvention {
  NNV_CONVENTION_ARGMAX = 0,
  NNV_CONVENTION_ARGMIN = 1,
  NNV_CONVENTION_RAW = 2,
} NnvConvention;

typedef enum NnvEngine {
  NNV_ENGINE_EXPLICIT = 0,
  NNV_ENGINE_REDUCED = 1,
} NnvEngine;

typedef enum NnvVerdictKind {
  NNV_VERDICT_KIND_SAT = 0,
  NNV_VERDICT_KIND_UNSAT = 1,
  NNV_VERDICT_KIND_NONE_FOUND = 2,
  NNV_VERDICT_KIND_TIMEOUT = 3,
} NnvVerdictKind;

/**
 * Opaque network handle.
 */
typedef struct NnvNetwork NnvNetwork;

/**
 * Opaque verification result.
 */
typedef struct NnvVerdict NnvVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call on the same thread.
 */
const char *nnv_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nnv_version(void);

/**
 * Parse `.nnet` text. The network starts with the raw convention.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` writable.
 */
enum NnvStatus nnv_network_from_nnet(const char *text, struct NnvNetwork **out);

/**
 * Parse a JSON network document.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` writable.
 */
enum NnvStatus nnv_network_from_json(const char *text, struct NnvNetwork **out);

/**
 * # Safety
 * `net` must come from this library and not be used afterwards. Null is
 * ignored.
 */
void nnv_network_free(struct NnvNetwork *net);

/**
 * # Safety
 * `net` must be a live handle; the outputs must be writable.
 */
enum NnvStatus nnv_network_sizes(const struct NnvNetwork *net, size_t *inputs, size_t *outputs);

/**
 * Number of weights and biases.
 *
 * # Safety
 * `net` must be a live handle and `out` writable.
 */
enum NnvStatus nnv_network_param_count(const struct NnvNetwork *net, size_t *out);

/**
 * # Safety
 * `net` must be a live handle.
 */
enum NnvStatus nnv_network_set_convention(struct NnvNetwork *net, enum NnvConvention convention);

/**
 * Denormalized output scores for `x` into `out[0..out_len]`.
 *
 * # Safety
 * `x` must hold `n` doubles and `out` room for `out_len`.
 */
enum NnvStatus nnv_forward(const struct NnvNetwork *net,
                           const double *x,
                           size_t n,
                           double *out,
                           size_t out_len);

/**
 * # Safety
 * `x` must hold `n` doubles and `out_class` be writable.
 */
enum NnvStatus nnv_classify(const struct NnvNetwork *net,
                            const double *x,
                            size_t n,
                            size_t *out_class);

/**
 * Robustness of the class of `seed` under `percent` noise on every node.
 *
 * # Safety
 * `seed` must hold `n` doubles and `out` be writable.
 */
enum NnvStatus nnv_verify_robustness(const struct NnvNetwork *net,
                                     const double *seed,
                                     size_t n,
                                     double percent,
                                     enum NnvEngine engine,
                                     double timeout_secs,
                                     struct NnvVerdict **out);

/**
 * Verify a property given as a JSON property file (robustness or safety).
 *
 * # Safety
 * `property_json` must be a NUL-terminated string and `out` writable.
 */
enum NnvStatus nnv_verify_property_json(const struct NnvNetwork *net,
                                        const char *property_json,
                                        enum NnvEngine engine,
                                        double timeout_secs,
                                        struct NnvVerdict **out);

/**
 * Kind of a verdict; a null handle reads as `TIMEOUT`.
 *
 * # Safety
 * `v` must be a live verdict or null.
 */
enum NnvVerdictKind nnv_verdict_kind(const struct NnvVerdict *v);

/**
 * Copy the witness input into `out`. `written` receives its length, which
 * is 0 when the verdict has no witness.
 *
 * # Safety
 * `out` must have room for `len` doubles and `written` be writable.
 */
enum NnvStatus nnv_verdict_witness(const struct NnvVerdict *v,
                                   double *out,
                                   size_t len,
                                   size_t *written);

/**
 * JSON rendering of a verdict; release with `nnv_string_free`. Null on
 * error.
 *
 * # Safety
 * `v` must be a live verdict.
 */
char *nnv_verdict_to_json(const struct NnvVerdict *v);

/**
 * # Safety
 * `v` must come from this library and not be used afterwards.
 */
void nnv_verdict_free(struct NnvVerdict *v);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void nnv_string_free(char *s);

/**
 * Whether segmenting `i` nodes into `m` variable and `mp` fixed nodes pays
 * off for `n` bins per node.
 *
 * # Safety
 * `out` must be writable.
 */
enum NnvStatus nnv_ris_optimal(uint64_t i, uint64_t m, uint64_t mp, uint32_t n, bool *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NNVERIF_H */
