#ifndef CFMIMO_H
#define CFMIMO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CfmStatus {
  CFM_STATUS_OK = 0,
  CFM_STATUS_NULL_POINTER = 1,
  CFM_STATUS_INVALID_ARGUMENT = 2,
  CFM_STATUS_CONFIG = 3,
  CFM_STATUS_NUMERICAL = 4,
  CFM_STATUS_IO = 5,
  CFM_STATUS_PANIC = 6,
} CfmStatus;

typedef enum CfmDetector {
  CFM_DETECTOR_MMSE = 0,
  CFM_DETECTOR_SOFT_IC = 1,
  CFM_DETECTOR_LIST = 2,
  CFM_DETECTOR_GENIE = 3,
} CfmDetector;

typedef enum CfmApMode {
  CFM_AP_MODE_ALL = 0,
  CFM_AP_MODE_SEL = 1,
} CfmApMode;

/**
 * Opaque LDPC code handle.
 */
typedef struct CfmLdpc CfmLdpc;

/**
 * Opaque list of sweep results.
 */
typedef struct CfmRecords CfmRecords;

/**
 * Opaque simulator handle.
 */
typedef struct CfmSimulator CfmSimulator;

/**
 * One row of a BER sweep.
 */
typedef struct CfmBerPoint {
  double snr_db;
  enum CfmDetector detector;
  enum CfmApMode ap_mode;
  uint32_t idd_iter;
  uint64_t trials;
  uint64_t bits_total;
  uint64_t bit_errors;
  double ber;
  uint64_t seed_base;
} CfmBerPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cfm_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *cfm_version(void);

/**
 * Creates a simulator from a TOML configuration string. `config` may be
 * empty for the defaults.
 *
 * # Safety
 * `config` must be a nul-terminated string and `out` a valid pointer.
 */
enum CfmStatus cfm_simulator_new(const char *config, struct CfmSimulator **out);

/**
 * # Safety
 * `sim` must come from [`cfm_simulator_new`] and not be used afterwards.
 */
void cfm_simulator_free(struct CfmSimulator *sim);

/**
 * Overrides the trial count and seed base of an existing simulator.
 *
 * # Safety
 * `sim` must be a live simulator handle.
 */
enum CfmStatus cfm_simulator_set_trials(struct CfmSimulator *sim, uint64_t trials, uint64_t seed);

/**
 * Runs the configured sweep.
 *
 * # Safety
 * `sim` must be a live simulator handle and `out` a valid pointer.
 */
enum CfmStatus cfm_simulator_sweep(const struct CfmSimulator *sim, struct CfmRecords **out);

/**
 * Number of rows; zero for a null handle.
 *
 * # Safety
 * `records` must be null or a live handle.
 */
size_t cfm_records_len(const struct CfmRecords *records);

/**
 * # Safety
 * `records` must be a live handle and `out` a valid pointer.
 */
enum CfmStatus cfm_records_get(const struct CfmRecords *records,
                               size_t index,
                               struct CfmBerPoint *out);

/**
 * Writes the rows in the CLI's CSV format.
 *
 * # Safety
 * `records` must be a live handle and `path` a nul-terminated string.
 */
enum CfmStatus cfm_records_write_csv(const struct CfmRecords *records, const char *path);

/**
 * # Safety
 * `records` must come from [`cfm_simulator_sweep`] and not be used afterwards.
 */
void cfm_records_free(struct CfmRecords *records);

/**
 * The bundled rate-1/2 code of length 256.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CfmStatus cfm_ldpc_default(struct CfmLdpc **out);

/**
 * Loads a code from an alist file.
 *
 * # Safety
 * `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum CfmStatus cfm_ldpc_from_alist(const char *path, struct CfmLdpc **out);

/**
 * # Safety
 * `code` must be null or a live handle.
 */
size_t cfm_ldpc_length(const struct CfmLdpc *code);

/**
 * # Safety
 * `code` must be null or a live handle.
 */
size_t cfm_ldpc_message_len(const struct CfmLdpc *code);

/**
 * Systematic encoding. Bits are bytes holding 0 or 1.
 *
 * # Safety
 * `msg` must hold `msg_len` bytes and `codeword` `codeword_len` bytes.
 */
enum CfmStatus cfm_ldpc_encode(const struct CfmLdpc *code,
                               const uint8_t *msg,
                               size_t msg_len,
                               uint8_t *codeword,
                               size_t codeword_len);

/**
 * Sum-product decoding of channel LLRs (`log P(0)/P(1)`). `posterior` may
 * be null; `iterations` and `converged` may be null.
 *
 * # Safety
 * `llr`, `bits` and a non-null `posterior` must each hold `len` elements.
 */
enum CfmStatus cfm_ldpc_decode(const struct CfmLdpc *code,
                               const double *llr,
                               size_t len,
                               uint32_t max_iter,
                               uint8_t *bits,
                               double *posterior,
                               uint32_t *iterations,
                               bool *converged);

/**
 * # Safety
 * `code` must come from one of the constructors and not be used afterwards.
 */
void cfm_ldpc_free(struct CfmLdpc *code);

/**
 * Box-plus of two LLRs.
 */
double cfm_box_plus(double a, double b);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CFMIMO_H */
