/* C interface to the DSRN relighting toolkit.
 *
 * All functions return a dsrn_status; on failure dsrn_last_error() describes the
 * problem (per thread, valid until the next call on that thread). Images are
 * interleaved RGB float32 in [0,1], row-major, height x width x 3.
 * Strings returned through char** are owned by the caller and released with
 * dsrn_string_free().
 */
#ifndef DSRN_DSRN_H
#define DSRN_DSRN_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DSRN_API __declspec(dllexport)
#else
#define DSRN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dsrn_status {
    DSRN_OK = 0,
    DSRN_ERR_FORMAT = 1,
    DSRN_ERR_DIMENSION = 2,
    DSRN_ERR_CONFIG = 3,
    DSRN_ERR_DATA = 4,
    DSRN_ERR_IO = 5,
    DSRN_ERR_NUMERIC = 6,
    DSRN_ERR_CORRUPT = 7,
    DSRN_ERR_VERSION = 8,
    DSRN_ERR_USAGE = 9,
    DSRN_ERR_UNSUPPORTED = 10,
    DSRN_ERR_INTERNAL = 11
} dsrn_status;

typedef enum dsrn_log_level {
    DSRN_LOG_DEBUG = 0,
    DSRN_LOG_INFO = 1,
    DSRN_LOG_WARN = 2,
    DSRN_LOG_ERROR = 3,
    DSRN_LOG_OFF = 4
} dsrn_log_level;

typedef struct dsrn_model dsrn_model;

DSRN_API const char* dsrn_version(void);
DSRN_API const char* dsrn_last_error(void);
DSRN_API const char* dsrn_status_name(dsrn_status status);
DSRN_API void dsrn_set_log_level(dsrn_log_level level);
DSRN_API void dsrn_string_free(char* s);
DSRN_API uint64_t dsrn_fnv1a64(const void* data, size_t n);

/* Compute device. Only "cpu" exists; the DSRN_DEVICE environment variable supplies the
 * default. Selecting anything else fails with DSRN_ERR_UNSUPPORTED. */
DSRN_API dsrn_status dsrn_select_device(const char* name);

/* arch_json may be NULL for the default architecture. */
DSRN_API dsrn_status dsrn_model_create(const char* arch_json, uint64_t seed, dsrn_model** out);
DSRN_API dsrn_status dsrn_model_load(const char* checkpoint_path, dsrn_model** out);
DSRN_API dsrn_status dsrn_model_save(const dsrn_model* model, const char* checkpoint_path);
DSRN_API void dsrn_model_destroy(dsrn_model* model);
DSRN_API dsrn_status dsrn_model_param_stats(const dsrn_model* model, uint64_t* count, uint64_t* fp32_bytes);
/* Number of images the model's task consumes (1 single, 2 multi). */
DSRN_API dsrn_status dsrn_model_input_count(const dsrn_model* model, int* count);
/* Architecture, task and training metadata as JSON. */
DSRN_API dsrn_status dsrn_model_info(const dsrn_model* model, char** json_out);

/* Relights one image; output must hold height*width*3 floats. */
DSRN_API dsrn_status dsrn_relight(const dsrn_model* model, const float* input, int height, int width, float* output);
/* Reads PNG input(s), fuses them for multi-input models, writes a PNG. input2 may be NULL. */
DSRN_API dsrn_status dsrn_relight_files(const dsrn_model* model, const char* input, const char* input2,
                                        const char* output);

/* Workflow entry points taking a JSON request and returning a JSON result. */
DSRN_API dsrn_status dsrn_synth_corpus(const char* request_json, char** result_json);
DSRN_API dsrn_status dsrn_train(const char* request_json, char** result_json);
DSRN_API dsrn_status dsrn_evaluate(const char* request_json, char** result_json);
DSRN_API dsrn_status dsrn_bench(const char* request_json, char** result_json);

#ifdef __cplusplus
}
#endif

#endif
