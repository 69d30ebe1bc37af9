#ifndef URLLC_DIM_H
#define URLLC_DIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  URLLC_STATUS_OK = 0,
  URLLC_STATUS_NULL_POINTER = 1,
  URLLC_STATUS_INVALID_ARGUMENT = 2,
  URLLC_STATUS_CONFIG = 3,
  URLLC_STATUS_EMPTY_DEPLOYMENT = 4,
  URLLC_STATUS_IO = 5,
  /**
   * The campaign was not run yet.
   */
  URLLC_STATUS_NOT_RUN = 6,
  /**
   * The campaign stopped at a failing cell; rows before it are valid.
   */
  URLLC_STATUS_INCOMPLETE = 7,
  URLLC_STATUS_PANIC = 8,
} UrllcStatus;

typedef enum {
  URLLC_REGIME_NOISE = 0,
  URLLC_REGIME_INTERFERENCE = 1,
} UrllcRegime;

typedef enum {
  URLLC_MODE_SINGLE = 0,
  URLLC_MODE_MULTI_CONNECTIVITY = 1,
  URLLC_MODE_MULTI_OPERATOR = 2,
  URLLC_MODE_MULTI_OPERATOR_UNCLUSTERED = 3,
} UrllcMode;

/**
 * Opaque campaign handle.
 */
typedef struct UrllcCampaign UrllcCampaign;

/**
 * Dimensioned bandwidth of one sample set.
 */
typedef struct {
  /**
   * Hz.
   */
  double bandwidth;
  /**
   * 95% order-statistic interval, Hz.
   */
  double ci_low;
  double ci_high;
  uint64_t n_samples;
  /**
   * Nonzero when fewer than 10/(1 - alpha) samples were given.
   */
  uint8_t undersampled;
} UrllcDimension;

/**
 * One row of the bandwidth-vs-density table.
 */
typedef struct {
  double carrier_hz;
  uint32_t array_side;
  double density_per_km2;
  UrllcRegime regime;
  UrllcMode mode;
  double alpha;
  double bandwidth_hz;
  double ci_low_hz;
  double ci_high_hz;
  uint64_t n_samples;
  uint64_t resample_count;
  uint64_t clamped_links;
  double runtime_s;
  uint8_t undersampled;
} UrllcRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *urllc_version(void);

/**
 * Copies the calling thread's last error message into `buf` (always
 * NUL-terminated when `len > 0`) and returns the buffer size needed to hold
 * it, including the NUL. Returns 0 when no error has been recorded.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t urllc_last_error(char *buf, size_t len);

/**
 * Bandwidth (Hz) needed to send `delta_bits` within `tau_tx_s` seconds at
 * linear SINR `gamma`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
UrllcStatus urllc_required_bandwidth(double delta_bits, double tau_tx_s, double gamma, double *out);

/**
 * Transmission delay (s) of `delta_bits` over bandwidth `w_hz` at linear
 * SINR `gamma`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
UrllcStatus urllc_tx_delay(double delta_bits, double w_hz, double gamma, double *out);

/**
 * Dimensions bandwidth from `n` linear SINR samples.
 *
 * # Safety
 * `gammas` must point to `n` readable doubles; `out` must be valid for
 * writes.
 */
UrllcStatus urllc_dimension_bandwidth(const double *gammas,
                                      size_t n,
                                      double delta_bits,
                                      double tau_tx_s,
                                      double alpha,
                                      UrllcDimension *out);

/**
 * Creates a campaign from TOML text in the CLI's config format. An empty
 * string gives the default campaign.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be valid for writes.
 */
UrllcStatus urllc_campaign_new(const char *toml, UrllcCampaign **out);

/**
 * Releases a campaign. Null is ignored.
 *
 * # Safety
 * `campaign` must come from [`urllc_campaign_new`] and not be used again.
 */
void urllc_campaign_free(UrllcCampaign *campaign);

/**
 * Overrides the number of experiments per cell.
 *
 * # Safety
 * `campaign` must be a live handle.
 */
UrllcStatus urllc_campaign_set_samples(UrllcCampaign *campaign, uint64_t n_samples);

/**
 * Overrides the master seed.
 *
 * # Safety
 * `campaign` must be a live handle.
 */
UrllcStatus urllc_campaign_set_seed(UrllcCampaign *campaign, uint64_t seed);

/**
 * Sets the worker-thread count; 0 uses every core. Results do not depend on
 * it.
 *
 * # Safety
 * `campaign` must be a live handle.
 */
UrllcStatus urllc_campaign_set_workers(UrllcCampaign *campaign, size_t workers);

/**
 * Number of (band, density, regime, mode) cells the campaign will run.
 *
 * # Safety
 * `campaign` must be a live handle; `out` must be valid for writes.
 */
UrllcStatus urllc_campaign_cell_count(const UrllcCampaign *campaign, size_t *out);

/**
 * Runs every cell. Returns `Incomplete` if a cell fails; rows of the cells
 * before it stay readable.
 *
 * # Safety
 * `campaign` must be a live handle.
 */
UrllcStatus urllc_campaign_run(UrllcCampaign *campaign);

/**
 * Number of result rows (cells × alphas) available after a run.
 *
 * # Safety
 * `campaign` must be a live handle; `out` must be valid for writes.
 */
UrllcStatus urllc_campaign_row_count(const UrllcCampaign *campaign, size_t *out);

/**
 * Copies row `index` into `out`.
 *
 * # Safety
 * `campaign` must be a live handle; `out` must be valid for writes.
 */
UrllcStatus urllc_campaign_row(const UrllcCampaign *campaign, size_t index, UrllcRow *out);

/**
 * Writes `bandwidth_vs_density.csv` and `manifest.json` into `out_dir`.
 *
 * # Safety
 * `campaign` must be a live handle; `out_dir` a NUL-terminated path.
 */
UrllcStatus urllc_campaign_write(const UrllcCampaign *campaign, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* URLLC_DIM_H */
