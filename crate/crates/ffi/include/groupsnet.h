#ifndef GROUPSNET_H
#define GROUPSNET_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum GnStatus {
  GN_STATUS_OK = 0,
  GN_STATUS_NULL_POINTER = 1,
  GN_STATUS_INVALID_ARGUMENT = 2,
  GN_STATUS_IO = 3,
  GN_STATUS_PARSE = 4,
  GN_STATUS_SCHEMA = 5,
  GN_STATUS_CONFIG = 6,
  GN_STATUS_CLIQUE_CAP = 7,
  GN_STATUS_DEGENERATE = 8,
  GN_STATUS_SERIALIZATION = 9,
  GN_STATUS_BUFFER_TOO_SMALL = 10,
  GN_STATUS_PANIC = 11,
} GnStatus;

typedef enum GnWeightMode {
  /**
   * Counts for instantaneous traces, seconds for interval traces.
   */
  GN_WEIGHT_MODE_AUTO = 0,
  GN_WEIGHT_MODE_COUNT = 1,
  GN_WEIGHT_MODE_DURATION = 2,
} GnWeightMode;

typedef enum GnPolicy {
  GN_POLICY_GROUPSNET = 0,
  GN_POLICY_BUBBLE = 1,
  GN_POLICY_FLOODING = 2,
} GnPolicy;

typedef struct GnGroups GnGroups;

typedef struct GnTrace GnTrace;

typedef struct GnReplayResult {
  bool delivered;
  /**
   * Delivery time; meaningful only when `delivered`.
   */
  int64_t delivered_at;
  size_t transmissions;
  size_t carriers;
} GnReplayResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until
 * the next failing call on the same thread.
 */
const char *gn_last_error_message(void);

/**
 * Library version as a static string.
 */
const char *gn_version(void);

/**
 * Loads a contact CSV with columns `a,b,start[,end]`.
 *
 * # Safety
 * `path` must be a valid C string; `out` must be writable.
 */
enum GnStatus gn_trace_load_csv(const char *path, struct GnTrace **out);

/**
 * Builds a trace from parallel arrays. `end` may be null for an
 * instantaneous trace.
 *
 * # Safety
 * `a`, `b`, `start` (and `end` when non-null) must point to `len` elements.
 */
enum GnStatus gn_trace_from_events(const uint32_t *a,
                                   const uint32_t *b,
                                   const int64_t *start,
                                   const int64_t *end,
                                   size_t len,
                                   size_t node_count,
                                   struct GnTrace **out);

/**
 * Generates a synthetic trace. `config_toml` may be null for defaults.
 *
 * # Safety
 * `config_toml` must be null or a valid C string; `out` must be writable.
 */
enum GnStatus gn_trace_synthetic(const char *config_toml, struct GnTrace **out);

/**
 * # Safety
 * `trace` must come from a `gn_trace_*` constructor; `out` must be writable.
 */
enum GnStatus gn_trace_node_count(const struct GnTrace *trace, size_t *out);

/**
 * # Safety
 * `trace` must come from a `gn_trace_*` constructor; `out` must be writable.
 */
enum GnStatus gn_trace_event_count(const struct GnTrace *trace, size_t *out);

/**
 * Releases a trace. Null is ignored.
 *
 * # Safety
 * `trace` must be null or an unreleased handle.
 */
void gn_trace_free(struct GnTrace *trace);

/**
 * Slices, thresholds, detects and tracks group meetings. `w_th <= 0`
 * selects the default for the weight mode.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum GnStatus gn_groups_detect(const struct GnTrace *trace,
                               int64_t tw,
                               int64_t w_th,
                               enum GnWeightMode weight_mode,
                               size_t k,
                               struct GnGroups **out);

/**
 * Number of tracked group timelines.
 *
 * # Safety
 * `groups` must be a live handle; `out` must be writable.
 */
enum GnStatus gn_groups_count(const struct GnGroups *groups, size_t *out);

/**
 * Meetings recorded for timeline `index`.
 *
 * # Safety
 * `groups` must be a live handle; `out` must be writable.
 */
enum GnStatus gn_groups_meeting_count(const struct GnGroups *groups, size_t index, size_t *out);

/**
 * # Safety
 * `groups` must be null or an unreleased handle.
 */
void gn_groups_free(struct GnGroups *groups);

/**
 * Most probable group route from groups met in `[now - lookback, now)`.
 *
 * On success `*found` says whether a route exists. Group ids are written
 * to `group_ids` (capacity `cap`) and the count to `*len`; a short buffer
 * yields `BufferTooSmall` with `*len` set to the required size.
 *
 * # Safety
 * Pointers must be valid; `group_ids` may be null when `cap` is 0.
 */
enum GnStatus gn_route(const struct GnGroups *groups,
                       uint32_t origin,
                       uint32_t destination,
                       int64_t now,
                       int64_t lookback,
                       int64_t ttl,
                       bool *found,
                       double *probability,
                       size_t *group_ids,
                       size_t cap,
                       size_t *len);

/**
 * Replays one message.
 *
 * GROUPS-NET needs `groups` and plans at the start of the send time's
 * window; Bubble Rap trains on the day-aligned `lookback` before sending.
 * Flooding ignores both.
 *
 * # Safety
 * `trace` must be a live handle, `groups` null or live, `out` writable.
 */
enum GnStatus gn_replay(const struct GnTrace *trace,
                        const struct GnGroups *groups,
                        enum GnPolicy policy,
                        uint32_t origin,
                        uint32_t destination,
                        int64_t send_time,
                        int64_t ttl,
                        int64_t lookback,
                        struct GnReplayResult *out);

/**
 * Jaccard similarity of two node-id sets.
 *
 * # Safety
 * `a` and `b` must point to `a_len` and `b_len` elements.
 */
enum GnStatus gn_similarity(const uint32_t *a,
                            size_t a_len,
                            const uint32_t *b,
                            size_t b_len,
                            double *out);

/**
 * Probability that a group seen `count` times in `lookback` seconds
 * meets again within `ttl` seconds.
 *
 * # Safety
 * `out` must be writable.
 */
enum GnStatus gn_remeet_probability(size_t count, int64_t lookback, int64_t ttl, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GROUPSNET_H */
