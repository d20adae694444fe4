#ifndef FORTA_H
#define FORTA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FortaStatus {
  FORTA_STATUS_OK = 0,
  FORTA_STATUS_NULL_POINTER = 1,
  FORTA_STATUS_INVALID_ARGUMENT = 2,
  FORTA_STATUS_INVALID_CONFIGURATION = 3,
  FORTA_STATUS_LOCALIZATION_FAILURE = 4,
  /**
   * The decode result handle still receives the partial answer.
   */
  FORTA_STATUS_DECODE_UNRELIABLE = 5,
  FORTA_STATUS_PROTOCOL_VIOLATION = 6,
  FORTA_STATUS_INSUFFICIENT_DATA = 7,
  FORTA_STATUS_IO = 8,
  FORTA_STATUS_BUFFER_TOO_SMALL = 9,
  FORTA_STATUS_PANIC = 10,
} FortaStatus;

/**
 * Decoder for one `(n, k)` DFT code.
 */
typedef struct FortaCodec FortaCodec;

typedef struct FortaDecodeResult FortaDecodeResult;

typedef struct FortaTheoryParams {
  size_t n;
  size_t a;
  size_t d;
  double sigma_g;
  double sigma_eps;
  double g_norm;
} FortaTheoryParams;

typedef struct FortaBound {
  double value;
  bool valid;
} FortaBound;

typedef struct FortaFeedbackStats {
  double mu_t;
  double sigma_t;
  double mu_q;
  double sigma_q;
  double c1;
} FortaFeedbackStats;

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `len` bytes. Returns the buffer size the full message
 * needs, or 0 when no error is recorded.
 */
size_t forta_last_error_message(char *buf, size_t len);

enum FortaStatus forta_codec_new(size_t n, size_t k, struct FortaCodec **out);

void forta_codec_free(struct FortaCodec *codec);

/**
 * `⌊(n − k)/2⌋`; 0 for a null handle.
 */
size_t forta_codec_max_errors(const struct FortaCodec *codec);

/**
 * Encodes `k` complex coefficients (split real and imaginary arrays) into
 * `n` codeword values.
 */
enum FortaStatus forta_codec_encode(const struct FortaCodec *codec,
                                    const double *msg_re,
                                    const double *msg_im,
                                    size_t k,
                                    double *out_re,
                                    double *out_im,
                                    size_t n);

/**
 * Decodes `n` received values with optional 1-based erasure hints. On
 * `FORTA_STATUS_DECODE_UNRELIABLE` `*out` still holds the partial result.
 */
enum FortaStatus forta_codec_decode(const struct FortaCodec *codec,
                                    const double *re,
                                    const double *im,
                                    size_t n,
                                    const size_t *hints,
                                    size_t n_hints,
                                    struct FortaDecodeResult **out);

void forta_decode_result_free(struct FortaDecodeResult *result);

/**
 * Writes the `k` decoded coefficients.
 */
enum FortaStatus forta_decode_result_message(const struct FortaDecodeResult *result,
                                             double *out_re,
                                             double *out_im,
                                             size_t k);

/**
 * Writes the sorted 1-based error positions. `*count` always receives the
 * number of positions; a short buffer yields `FORTA_STATUS_BUFFER_TOO_SMALL`.
 */
enum FortaStatus forta_decode_result_error_positions(const struct FortaDecodeResult *result,
                                                     size_t *out,
                                                     size_t cap,
                                                     size_t *count);

enum FortaStatus forta_decode_result_residual(const struct FortaDecodeResult *result, double *out);

enum FortaStatus forta_eta(size_t n, size_t a, double *out);

enum FortaStatus forta_sin_alpha(const struct FortaTheoryParams *params, struct FortaBound *out);

enum FortaStatus forta_sin_alpha_mod(const struct FortaTheoryParams *params,
                                     const struct FortaFeedbackStats *stats,
                                     struct FortaBound *out);

enum FortaStatus forta_corollary_condition(const struct FortaTheoryParams *params,
                                           const struct FortaFeedbackStats *stats,
                                           bool *out);

/**
 * Krum scores of `n_users` row-major points of length `dim`; writes
 * `n_users` scores.
 */
enum FortaStatus forta_krum_scores(const double *points,
                                   size_t n_users,
                                   size_t dim,
                                   size_t byzantine,
                                   double *out_scores);

/**
 * The `m` lowest-scoring users, 1-based and ascending, ties to the lower id.
 */
enum FortaStatus forta_select(const double *scores, size_t n, size_t m, size_t *out_users);

#endif  /* FORTA_H */
