#ifndef POEM_H
#define POEM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PoemStatus {
  POEM_STATUS_OK = 0,
  POEM_STATUS_NULL_ARGUMENT = 1,
  POEM_STATUS_INVALID_UTF8 = 2,
  POEM_STATUS_PARSE = 3,
  POEM_STATUS_INVALID = 4,
  POEM_STATUS_NOT_FOUND = 5,
  // The ingestion service answered with a non-2xx status.
  POEM_STATUS_REJECTED = 6,
  POEM_STATUS_STORAGE = 7,
  POEM_STATUS_PANIC = 8,
} PoemStatus;

// A parsed sensor report.
typedef struct PoemReport PoemReport;

// An ingestion service and console over one set of stores.
typedef struct PoemSystem PoemSystem;

// Office and machine details for `poem_system_provision`. `user_id` and
// `monitor_type` may be null.
typedef struct PoemProvision {
  const char *user_id;
  const char *office;
  const char *department;
  const char *floor;
  const char *building;
  const char *zone;
  const char *machine_type;
  const char *monitor_type;
  double p_off;
  double p_sleep;
  double p_idle;
  double p_sidle;
} PoemProvision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *poem_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void poem_string_free(char *s);

// Parses one report line.
//
// # Safety
// `line` must be a NUL-terminated string and `out` a valid pointer.
enum PoemStatus poem_report_parse(const char *line, struct PoemReport **out_report);

// # Safety
// `report` must come from `poem_report_parse` and not be used afterwards.
void poem_report_free(struct PoemReport *report);

// Canonical wire form. Free with `poem_string_free`.
//
// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum PoemStatus poem_report_to_wire(const struct PoemReport *report, char **out_line);

// The report's `id`. Free with `poem_string_free`.
//
// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum PoemStatus poem_report_id(const struct PoemReport *report, char **out_id);

// The indicator name, e.g. `ambsensor`. Free with `poem_string_free`.
//
// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum PoemStatus poem_report_indicator(const struct PoemReport *report, char **out_name);

// Seconds since the Unix epoch.
//
// # Safety
// `report` must be a live handle and `out` a valid pointer.
enum PoemStatus poem_report_tsutc(const struct PoemReport *report, int64_t *out_unix);

// A numeric payload value by wire name, e.g. `tempC`. `NotFound` when absent.
//
// # Safety
// `report` must be a live handle, `name` NUL-terminated and `out` valid.
enum PoemStatus poem_report_number(const struct PoemReport *report,
                                   const char *name,
                                   double *out_value);

// Annual typical energy consumption in kWh.
//
// # Safety
// `out` must be a valid pointer.
enum PoemStatus poem_tec_annual(double p_off,
                                double p_sleep,
                                double p_idle,
                                double p_sidle,
                                double t_off,
                                double t_sleep,
                                double t_idle,
                                double t_sidle,
                                double t_work,
                                double *out_kwh);

// Opens the stores in `data_dir`, or in memory when it is null.
//
// # Safety
// `data_dir` must be null or NUL-terminated; `out` must be valid.
enum PoemStatus poem_system_open(const char *data_dir, struct PoemSystem **out_system);

// # Safety
// `system` must come from `poem_system_open` and not be used afterwards.
void poem_system_free(struct PoemSystem *system);

// Registers a user and creates their streams. Returns the user id, which
// the caller frees with `poem_string_free`.
//
// # Safety
// `system` must be live, the strings in `args` NUL-terminated or allowed null, `out` valid.
enum PoemStatus poem_system_provision(const struct PoemSystem *system,
                                      const struct PoemProvision *args,
                                      char **out_user_id);

// Posts a report body to `/sensor` or `/meter`. `http_status` receives
// the status the HTTP endpoint would answer; non-2xx yields `Rejected`.
//
// # Safety
// `system` must be live, `path` and `body` NUL-terminated, `http_status` valid.
enum PoemStatus poem_system_ingest(const struct PoemSystem *system,
                                   const char *path,
                                   const char *body,
                                   uint16_t *http_status);

// Number of stored documents in a user's stream for an indicator name.
//
// # Safety
// `system` must be live, the strings NUL-terminated and `out` valid.
enum PoemStatus poem_system_count(const struct PoemSystem *system,
                                  const char *user_id,
                                  const char *indicator,
                                  size_t *out_count);

// The user's home view as JSON. Free with `poem_string_free`.
//
// # Safety
// `system` must be live, `user_id` NUL-terminated and `out` valid.
enum PoemStatus poem_system_home_view(const struct PoemSystem *system,
                                      const char *user_id,
                                      char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POEM_H */
