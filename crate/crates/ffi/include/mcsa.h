#ifndef MCSA_H
#define MCSA_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum McsaBidding {
  MCSA_BIDDING_MMIN = 0,
  MCSA_BIDDING_GMAX = 1,
} McsaBidding;

/**
 * Result of every fallible call.
 */
typedef enum McsaStatus {
  MCSA_STATUS_OK = 0,
  MCSA_STATUS_NULL_ARGUMENT = 1,
  MCSA_STATUS_INVALID_UTF8 = 2,
  MCSA_STATUS_PARSE = 3,
  MCSA_STATUS_INVALID_ARGUMENT = 4,
  MCSA_STATUS_GENERATE = 5,
  MCSA_STATUS_SETTLE = 6,
  MCSA_STATUS_OUT_OF_RANGE = 7,
  MCSA_STATUS_OVERFLOW = 8,
  MCSA_STATUS_PANIC = 9,
} McsaStatus;

/**
 * Opaque result of one auction.
 */
typedef struct McsaOutcome McsaOutcome;

/**
 * Opaque market handle.
 */
typedef struct McsaScenario McsaScenario;

/**
 * Parameters for a generated market. Start from
 * [`mcsa_market_params_default`] and override fields.
 */
typedef struct McsaMarketParams {
  uint32_t sellers;
  uint32_t buyers;
  uint64_t distance_micros;
  uint64_t area_micros;
  uint32_t c_max;
  uint32_t d_max;
  uint64_t base_bid_micros;
  /**
   * Two 20x20 hotspots of 20 buyers each instead of a uniform layout.
   */
  bool clustered;
} McsaMarketParams;

/**
 * One winner: channels traded and the total paid to or charged by it.
 */
typedef struct McsaAward {
  uint32_t id;
  uint32_t channels;
  int64_t amount_micros;
} McsaAward;

typedef struct McsaMetrics {
  int64_t efficiency_micros;
  uint64_t channels_traded;
  double per_channel_efficiency;
  /**
   * Meaningful only when `has_degradation` is set.
   */
  double degradation;
  bool has_degradation;
  int64_t pa_efficiency_micros;
} McsaMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy of the message behind the last failed call on this thread, or NULL.
 * Free with [`mcsa_string_free`].
 */
char *mcsa_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed. NULL is ignored.
 */
void mcsa_string_free(char *s);

/**
 * Static, NUL-terminated crate version.
 */
const char *mcsa_version(void);

/**
 * 10 sellers, 100 uniform buyers, distance 10 in a 100x100 area, pattern (3,5,0).
 */
struct McsaMarketParams mcsa_market_params_default(void);

/**
 * Parses scenario file text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum McsaStatus mcsa_scenario_parse(const char *text, struct McsaScenario **out);

/**
 * Draws a market from `params` and `seed`.
 *
 * # Safety
 * `params` must point to a valid struct; `out` must be writable.
 */
enum McsaStatus mcsa_scenario_generate(const struct McsaMarketParams *params,
                                       uint64_t seed,
                                       struct McsaScenario **out);

/**
 * Canonical file text of a scenario. Free with [`mcsa_string_free`].
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum McsaStatus mcsa_scenario_serialize(const struct McsaScenario *scenario, char **out);

/**
 * Number of sellers, or 0 for NULL.
 *
 * # Safety
 * `scenario` must be a live handle or NULL.
 */
uint32_t mcsa_scenario_seller_count(const struct McsaScenario *scenario);

/**
 * Number of buyers, or 0 for NULL.
 *
 * # Safety
 * `scenario` must be a live handle or NULL.
 */
uint32_t mcsa_scenario_buyer_count(const struct McsaScenario *scenario);

/**
 * # Safety
 * `scenario` must come from this library and not have been freed. NULL is ignored.
 */
void mcsa_scenario_free(struct McsaScenario *scenario);

/**
 * Clears the market with deterministic ties and uniform pricing, and
 * evaluates it against Pure Allocation. The outcome keeps its own copy of
 * the scenario.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum McsaStatus mcsa_auction_run(const struct McsaScenario *scenario,
                                 enum McsaBidding bidding,
                                 struct McsaOutcome **out);

/**
 * # Safety
 * `outcome` must come from this library and not have been freed. NULL is ignored.
 */
void mcsa_outcome_free(struct McsaOutcome *outcome);

/**
 * Auctioneer profit.
 *
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum McsaStatus mcsa_outcome_profit(const struct McsaOutcome *outcome, int64_t *out);

/**
 * Channels sold by winning sellers, or 0 for NULL.
 *
 * # Safety
 * `outcome` must be a live handle or NULL.
 */
uint64_t mcsa_outcome_channels_traded(const struct McsaOutcome *outcome);

/**
 * Index of the last profitable trade before reduction, or 0 for NULL.
 *
 * # Safety
 * `outcome` must be a live handle or NULL.
 */
uint64_t mcsa_outcome_k_prime(const struct McsaOutcome *outcome);

/**
 * Number of winning sellers, or 0 for NULL.
 *
 * # Safety
 * `outcome` must be a live handle or NULL.
 */
uint32_t mcsa_outcome_seller_count(const struct McsaOutcome *outcome);

/**
 * Number of winning buyers, or 0 for NULL.
 *
 * # Safety
 * `outcome` must be a live handle or NULL.
 */
uint32_t mcsa_outcome_buyer_count(const struct McsaOutcome *outcome);

/**
 * Winning seller `index` in id order; `amount_micros` is its payment.
 *
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum McsaStatus mcsa_outcome_seller_at(const struct McsaOutcome *outcome,
                                       uint32_t index,
                                       struct McsaAward *out);

/**
 * Winning buyer `index` in id order; `amount_micros` is its charge.
 *
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum McsaStatus mcsa_outcome_buyer_at(const struct McsaOutcome *outcome,
                                      uint32_t index,
                                      struct McsaAward *out);

/**
 * Efficiency metrics; the rational fields are rounded to the nearest double.
 *
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum McsaStatus mcsa_outcome_metrics(const struct McsaOutcome *outcome, struct McsaMetrics *out);

/**
 * Human-readable diagnostic dump. Free with [`mcsa_string_free`].
 *
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum McsaStatus mcsa_outcome_report(const struct McsaOutcome *outcome, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MCSA_H */
