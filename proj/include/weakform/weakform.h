/* C interface to the weakform library. Every call returns a status; on failure
 * wf_last_error() describes it (thread-local, valid until the next call on the
 * same thread). Strings returned through char** are owned by the caller and
 * released with wf_string_free. */
#ifndef WEAKFORM_H
#define WEAKFORM_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define WF_API __attribute__((visibility("default")))
#else
#define WF_API
#endif

typedef enum wf_status {
  WF_OK = 0,
  WF_INVALID_ARGUMENT = 1,
  WF_SYNTAX = 2,
  WF_UNKNOWN_FUNCTION = 3,
  WF_UNBOUND_VARIABLE = 4,
  WF_NON_FINITE = 5,
  WF_GRID_MISMATCH = 6,
  WF_PRECONDITION = 7,
  WF_CONVERGENCE = 8,
  WF_NODE_DETECTED = 9,
  WF_CONFIG = 10,
  WF_IO = 11,
  WF_INTERNAL = 99
} wf_status;

typedef enum wf_format { WF_FORMAT_JSON = 0, WF_FORMAT_CSV = 1 } wf_format;

typedef struct wf_report wf_report;
typedef struct wf_suite wf_suite;
typedef struct wf_expr wf_expr;
typedef struct wf_field wf_field;

WF_API const char* wf_version(void);
WF_API const char* wf_last_error(void);
/* JSON pointer of the last WF_CONFIG error, "" otherwise. */
WF_API const char* wf_last_error_pointer(void);
WF_API void wf_string_free(char* s);

/* Scenarios. refine = 0 keeps the config's own level count. */
WF_API wf_status wf_run_scenario(const char* command, const char* config_json, size_t refine, int r3,
                                 wf_report** out);
WF_API int wf_report_passed(const wf_report* r);
WF_API size_t wf_report_check_count(const wf_report* r);
/* name stays valid for the report's lifetime. */
WF_API wf_status wf_report_check(const wf_report* r, size_t i, const char** name, double* value, int* passed);
WF_API wf_status wf_report_render(const wf_report* r, wf_format format, char** out);
WF_API wf_status wf_report_write(const wf_report* r, const char* path, wf_format format);
WF_API void wf_report_free(wf_report* r);

/* The shipped scenario matrix. out_dir may be NULL. */
WF_API size_t wf_default_workers(void);
WF_API wf_status wf_suite_run(size_t workers, const char* out_dir, wf_suite** out);
WF_API int wf_suite_passed(const wf_suite* s);
WF_API size_t wf_suite_count(const wf_suite* s);
/* error is "" unless the scenario threw. Strings live as long as the suite. */
WF_API wf_status wf_suite_entry(const wf_suite* s, size_t i, const char** name, double* seconds, int* passed,
                                const char** error);
WF_API wf_status wf_suite_summary(const wf_suite* s, char** out);
WF_API void wf_suite_free(wf_suite* s);

/* Expressions. */
WF_API wf_status wf_expr_parse(const char* source, wf_expr** out);
WF_API wf_status wf_expr_eval(const wf_expr* e, const char* const* names, const double* values, size_t count,
                              double* out);
WF_API wf_status wf_expr_string(const wf_expr* e, char** out);
WF_API wf_status wf_expr_derivative(const wf_expr* e, const char* variable, wf_expr** out);
WF_API void wf_expr_free(wf_expr* e);

/* Fields. grid_json is {"lo":[..],"hi":[..],"points":[..],"periodic":[..]}. */
WF_API wf_status wf_field_from_expr(const wf_expr* e, const char* grid_json, wf_field** out);
WF_API wf_status wf_field_read(const char* path, wf_field** out);
WF_API wf_status wf_field_write(const wf_field* f, const char* path);
WF_API size_t wf_field_components(const wf_field* f);
WF_API size_t wf_field_size(const wf_field* f);
WF_API const double* wf_field_data(const wf_field* f, size_t component);
WF_API void wf_field_free(wf_field* f);

#ifdef __cplusplus
}
#endif

#endif
