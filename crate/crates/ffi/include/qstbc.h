#ifndef QSTBC_H
#define QSTBC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QstbcStatus {
  QSTBC_STATUS_OK = 0,
  QSTBC_STATUS_NULL_POINTER = 1,
  QSTBC_STATUS_INVALID_ARGUMENT = 2,
  QSTBC_STATUS_INVALID_CONFIG = 3,
  QSTBC_STATUS_INVALID_CODEBOOK = 4,
  QSTBC_STATUS_IO = 5,
  QSTBC_STATUS_VERIFICATION_FAILED = 6,
  QSTBC_STATUS_PANIC = 7,
} QstbcStatus;

/**
 * Stabilizer code for one `(M, N, T, d)`.
 */
typedef struct QstbcCode QstbcCode;

typedef struct QstbcCodebook QstbcCodebook;

/**
 * Encoder/decoder for a code and codebook pair.
 */
typedef struct QstbcDecoder QstbcDecoder;

typedef struct QstbcComplex {
  double re;
  double im;
} QstbcComplex;

typedef struct QstbcBerPoint {
  double snr_db;
  uint64_t trials;
  uint64_t bits_sent;
  uint64_t bit_errors;
  double ber;
  double ci_low;
  double ci_high;
  uint64_t symbol_errors;
  double ser;
} QstbcBerPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *qstbc_version(void);

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *qstbc_last_error_message(void);

/**
 * Build the code for `(m, n, t, d)`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum QstbcStatus qstbc_code_new(size_t m, size_t n, size_t t, size_t d, struct QstbcCode **out);

void qstbc_code_free(struct QstbcCode *code);

/**
 * `MT`, the length of an encoded signal. 0 for a null handle.
 *
 * # Safety
 * `code` must be null or a live handle.
 */
size_t qstbc_code_signal_len(const struct QstbcCode *code);

/**
 * `NT`, the length of a received block. 0 for a null handle.
 *
 * # Safety
 * `code` must be null or a live handle.
 */
size_t qstbc_code_received_len(const struct QstbcCode *code);

/**
 * Load a codebook file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` as in [`qstbc_code_new`].
 */
enum QstbcStatus qstbc_codebook_load(const char *path, struct QstbcCodebook **out);

/**
 * Optimize a max-min chordal packing of `size` lines in `C^dim`.
 *
 * # Safety
 * `out` as in [`qstbc_code_new`].
 */
enum QstbcStatus qstbc_codebook_generate(size_t dim,
                                         size_t size,
                                         uint64_t seed,
                                         size_t iterations,
                                         struct QstbcCodebook **out);

/**
 * # Safety
 * `codebook` must be a live handle and `path` a NUL-terminated string.
 */
enum QstbcStatus qstbc_codebook_save(const struct QstbcCodebook *codebook, const char *path);

void qstbc_codebook_free(struct QstbcCodebook *codebook);

/**
 * Number of codewords. 0 for a null handle.
 *
 * # Safety
 * `codebook` must be null or a live handle.
 */
size_t qstbc_codebook_len(const struct QstbcCodebook *codebook);

/**
 * Line dimension. 0 for a null handle.
 *
 * # Safety
 * `codebook` must be null or a live handle.
 */
size_t qstbc_codebook_dim(const struct QstbcCodebook *codebook);

/**
 * Minimum pairwise chordal distance. NaN for a null handle.
 *
 * # Safety
 * `codebook` must be null or a live handle.
 */
double qstbc_codebook_min_distance(const struct QstbcCodebook *codebook);

/**
 * Pair a code with a codebook of matching dimension. The handles may be
 * freed afterwards.
 *
 * # Safety
 * `code` and `codebook` must be live handles; `out` as in [`qstbc_code_new`].
 */
enum QstbcStatus qstbc_decoder_new(const struct QstbcCode *code,
                                   const struct QstbcCodebook *codebook,
                                   struct QstbcDecoder **out);

void qstbc_decoder_free(struct QstbcDecoder *decoder);

/**
 * Write the transmit signal `sqrt(T) C s_index` (length `MT`) to `signal`.
 *
 * # Safety
 * `decoder` must be a live handle and `signal` must point to `len` writable
 * elements.
 */
enum QstbcStatus qstbc_encode(const struct QstbcDecoder *decoder,
                              size_t index,
                              struct QstbcComplex *signal,
                              size_t len);

/**
 * ML-decode a received block `y` of length `NT`. Writes the codebook index
 * and its bit label.
 *
 * # Safety
 * `decoder` must be a live handle, `y` must point to `len` readable elements
 * and `index`/`label` must be writable (either may be null to skip it).
 */
enum QstbcStatus qstbc_decode(const struct QstbcDecoder *decoder,
                              const struct QstbcComplex *y,
                              size_t len,
                              size_t *index,
                              uint32_t *label);

/**
 * Run a BER sweep and fill `points[0..n_points]`.
 *
 * # Safety
 * `code` and `codebook` must be live handles; `snr_db` must point to
 * `n_points` readable values and `points` to `n_points` writable records.
 */
enum QstbcStatus qstbc_simulate(const struct QstbcCode *code,
                                const struct QstbcCodebook *codebook,
                                const double *snr_db,
                                size_t n_points,
                                uint64_t trials_per_point,
                                uint64_t seed,
                                size_t workers,
                                struct QstbcBerPoint *points);

/**
 * Run the invariant suite for `(m, n, t, d)`. Returns
 * `VerificationFailed` if any check fails; `checks` and `failed` (either may
 * be null) receive the totals.
 *
 * # Safety
 * `checks` and `failed` must be null or writable.
 */
enum QstbcStatus qstbc_verify(size_t m,
                              size_t n,
                              size_t t,
                              size_t d,
                              uint64_t seed,
                              size_t *checks,
                              size_t *failed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSTBC_H */
