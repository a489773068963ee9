#ifndef T2S_H
#define T2S_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes. Zero is success.
typedef enum T2sStatus {
  T2S_STATUS_OK = 0,
  // A required pointer argument was null.
  T2S_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  T2S_STATUS_INVALID_UTF8 = 2,
  // The named database is not in the catalog.
  T2S_STATUS_NOT_FOUND = 3,
  // The input could not be loaded or parsed.
  T2S_STATUS_INVALID_INPUT = 4,
  // A Rust panic was caught at the boundary.
  T2S_STATUS_INTERNAL = 5,
} T2sStatus;

// Opaque schema catalog.
typedef struct T2sCatalog T2sCatalog;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. Valid until
// the next call into this library on the same thread.
const char *t2s_last_error(void);

// Library version as a static NUL-terminated string.
const char *t2s_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void t2s_string_free(char *s);

// Loads a catalog from a SPIDER `tables.json`, a native schema file or a
// directory of native schemas.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum T2sStatus t2s_catalog_load(const char *path, struct T2sCatalog **out);

// Number of databases in the catalog.
//
// # Safety
// `catalog` must be a live handle; `out` must be writable.
enum T2sStatus t2s_catalog_len(const struct T2sCatalog *catalog, size_t *out);

// Releases a catalog. Null is ignored.
//
// # Safety
// `catalog` must come from [`t2s_catalog_load`] and not have been freed.
void t2s_catalog_free(struct T2sCatalog *catalog);

// Validates `sql` against database `db`. Writes whether the query is
// aligned with the schema and, when `report_json` is non-null, the full
// report as JSON. An unparsable query is not an error: it yields
// `aligned = false` and a report carrying the syntax error.
//
// # Safety
// Strings must be NUL-terminated; `aligned` must be writable; the handle
// must be live.
enum T2sStatus t2s_validate(const struct T2sCatalog *catalog,
                            const char *db,
                            const char *sql,
                            bool *aligned,
                            char **report_json);

// Applies the suggested name repairs for `sql` and writes the rewritten
// query. An aligned query comes back unchanged.
//
// # Safety
// As for [`t2s_validate`]; `repaired` must be writable.
enum T2sStatus t2s_repair(const struct T2sCatalog *catalog,
                          const char *db,
                          const char *sql,
                          char **repaired);

// Recovers the SQL statement from raw model output.
//
// # Safety
// `raw` must be NUL-terminated; `sql` must be writable.
enum T2sStatus t2s_extract_sql(const char *raw, char **sql);

// Exact-set match of a predicted query against a gold query.
//
// # Safety
// Strings must be NUL-terminated; `matched` must be writable.
enum T2sStatus t2s_exact_match(const char *pred,
                               const char *gold,
                               bool ignore_literals,
                               bool *matched);

// Mean of `len` token log-probabilities.
//
// # Safety
// `values` must point to `len` doubles; `mean` must be writable.
enum T2sStatus t2s_mean_logprob(const double *values, size_t len, double *mean);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* T2S_H */
