#ifndef INCPREF_H
#define INCPREF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IpStatus {
  IP_STATUS_OK = 0,
  IP_STATUS_NULL_ARGUMENT = 1,
  IP_STATUS_INVALID_UTF8 = 2,
  IP_STATUS_PARSE_ERROR = 3,
  IP_STATUS_INCOHERENT = 4,
  IP_STATUS_NO_AGREEING_PAIR = 5,
  IP_STATUS_QUERY_FAILED = 6,
  IP_STATUS_PANIC = 7,
} IpStatus;

// Opaque handle to a parsed assessment.
typedef struct IpAssessment IpAssessment;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Parse a problem file given as JSON text.
//
// # Safety
// `json` must be a nul-terminated string and `out` a valid pointer. On
// success `*out` receives a handle to release with `ip_assessment_free`.
enum IpStatus ip_assessment_from_json(const char *json, struct IpAssessment **out);

// # Safety
// `a` must be null or a handle from `ip_assessment_from_json` not yet freed.
void ip_assessment_free(struct IpAssessment *a);

// Whether some state-dependent expected utility function agrees with the basis.
//
// # Safety
// `a` must be a live handle and `out` a valid pointer.
enum IpStatus ip_is_coherent(const struct IpAssessment *a, bool *out);

// An agreeing probability/utility pair as `{"kind": "pair", ...}` JSON.
// Returns `NoAgreeingPair` (and still fills `out`) when there is none.
//
// # Safety
// `a` must be a live handle and `out` a valid pointer.
enum IpStatus ip_find_pair(const struct IpAssessment *a, char **out);

// Answer a query in the session JSON format, e.g.
// `{"kind": "bounds", "target": {"const": "c2"}, "mode": "pairs"}`.
// On failure `*out` holds an `{"error": ...}` payload.
//
// # Safety
// `a` must be a live handle, `query` a nul-terminated string and `out` a
// valid pointer.
enum IpStatus ip_query_json(const struct IpAssessment *a, const char *query, char **out);

// # Safety
// `s` must be null or a string returned by this library, freed at most once.
void ip_string_free(char *s);

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next call into the library from the same thread.
const char *ip_last_error_message(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INCPREF_H */
