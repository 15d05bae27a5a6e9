#ifndef CMR_CMR_H
#define CMR_CMR_H

/* C interface of cmrkit. Every function returns a cmr_status; on failure the
 * message is available from cmr_last_error() (per thread, valid until the
 * next call on that thread). Strings returned through char** are owned by
 * the caller and released with cmr_string_free. Handles are opaque and
 * released with their *_free function; passing NULL to a free is a no-op. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(CMR_BUILDING_LIBRARY)
#define CMR_API __declspec(dllexport)
#else
#define CMR_API __declspec(dllimport)
#endif
#else
#define CMR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cmr_status {
  CMR_OK = 0,
  CMR_E_FORMAT = 1,
  CMR_E_SIZE = 2,
  CMR_E_ARGUMENT = 3,
  CMR_E_LOCATE = 4,
  CMR_E_UNDEFINED_DISTANCE = 5,
  CMR_E_TRAINING = 6,
  CMR_E_SELECTION = 7,
  CMR_E_STRATIFICATION = 8,
  CMR_E_BUILD = 9,
  CMR_E_TRACE = 10,
  CMR_E_IO = 11,
  CMR_E_MODEL = 12,
  CMR_E_CONFIG = 13,
  CMR_E_PIPELINE = 14,
  CMR_E_NULL = 90, /* required pointer argument was NULL */
  CMR_E_INTERNAL = 99
} cmr_status;

typedef struct cmr_volume cmr_volume;
typedef struct cmr_config cmr_config;
typedef struct cmr_model cmr_model;

CMR_API const char* cmr_version(void);
CMR_API const char* cmr_status_name(cmr_status s);
CMR_API const char* cmr_last_error(void);
CMR_API void cmr_string_free(char* s);

/* ---- configuration ---------------------------------------------------- */

CMR_API cmr_status cmr_config_new(cmr_config** out);
CMR_API void cmr_config_free(cmr_config* cfg);
CMR_API cmr_status cmr_config_load_file(cmr_config* cfg, const char* path);
/* Applies CMR_* variables of the process environment. */
CMR_API cmr_status cmr_config_apply_env(cmr_config* cfg);
CMR_API cmr_status cmr_config_set(cmr_config* cfg, const char* key, const char* value);
CMR_API cmr_status cmr_config_get(const cmr_config* cfg, const char* key, char** value);
/* "key = value" lines preceded by a comment describing the key. */
CMR_API cmr_status cmr_config_dump(const cmr_config* cfg, char** text);
/* Environment variable that overrides `key`. */
CMR_API cmr_status cmr_config_env_name(const char* key, char** name);

/* ---- volumes ------------------------------------------------------------ */

/* UINT8 files load as label volumes, FLOAT32 files as scalar volumes. */
CMR_API cmr_status cmr_volume_load(const char* path, cmr_volume** out);
CMR_API cmr_status cmr_volume_save(const cmr_volume* v, const char* path);
CMR_API void cmr_volume_free(cmr_volume* v);
CMR_API cmr_status cmr_volume_new_scalar(const size_t dims[4], const double spacing[4], int ndims,
                                         const float* data, cmr_volume** out);
CMR_API cmr_status cmr_volume_new_label(const size_t dims[4], const double spacing[4], int ndims,
                                        const uint8_t* data, cmr_volume** out);
/* Any output pointer may be NULL. */
CMR_API cmr_status cmr_volume_info(const cmr_volume* v, size_t dims[4], double spacing[4], int* ndims,
                                   int* is_label);
/* Borrowed pointers, valid while the handle lives. */
CMR_API cmr_status cmr_volume_scalar_data(const cmr_volume* v, const float** data, size_t* count);
CMR_API cmr_status cmr_volume_label_data(const cmr_volume* v, const uint8_t** data, size_t* count);

/* ---- stages ------------------------------------------------------------- */

/* Locates the heart on a cine volume; `report` is JSON, `patch` (optional)
 * receives the cropped cine. */
CMR_API cmr_status cmr_roi_locate(const cmr_volume* cine, const cmr_config* cfg, char** report,
                                  cmr_volume** patch);

/* Draws one parameter set from `seed` and applies it to every (z, t) slice.
 * `labels` and `labels_out` may be NULL. `params` (optional) is JSON. */
CMR_API cmr_status cmr_augment(const cmr_volume* image, const cmr_volume* labels, const cmr_config* cfg,
                               uint64_t seed, cmr_volume** image_out, cmr_volume** labels_out, char** params);

CMR_API cmr_status cmr_weight_map(const cmr_volume* labels, const cmr_config* cfg, cmr_volume** out);

/* `logits`: FLOAT32 (nx, ny, nz, classes). `weights` may be NULL (unit
 * weights). `grad` (optional) receives d loss / d logits in the same layout. */
CMR_API cmr_status cmr_loss(const cmr_volume* logits, const cmr_volume* labels, const cmr_volume* weights,
                            const cmr_config* cfg, char** report, cmr_volume** grad);

CMR_API cmr_status cmr_postprocess(const cmr_volume* labels, const cmr_config* cfg, cmr_volume** out);

/* Per-class overlap, rates and Hausdorff distance as JSON. */
CMR_API cmr_status cmr_evaluate(const cmr_volume* pred, const cmr_volume* gt, char** report);

/* `n` cases. `csv` (optional) has columns
 * case_id,class,dice,jaccard,tpr,spc,ppv,npv,hd_mm with one row per case and
 * class, then "mean" and "std" rows per class; undefined values are empty.
 * `report` (optional) is the same as JSON. */
CMR_API cmr_status cmr_evaluate_batch(const cmr_volume* const* preds, const cmr_volume* const* gts,
                                      const char* const* case_ids, size_t n, char** csv, char** report);

/* Header line plus one row for `case_id`. */
CMR_API cmr_status cmr_features(const cmr_volume* ed, const cmr_volume* es, const cmr_config* cfg,
                                const char* case_id, char** csv);

/* ---- diagnosis ------------------------------------------------------------ */

/* Feature CSV (as written by cmr_features, any number of rows) and a
 * case_id,label CSV. `summary` (optional) is JSON. */
CMR_API cmr_status cmr_model_train(const char* features_csv, const char* labels_csv, const cmr_config* cfg,
                                   cmr_model** out, char** summary);
CMR_API cmr_status cmr_model_load(const char* path, cmr_model** out);
CMR_API cmr_status cmr_model_save(const cmr_model* m, const char* path);
CMR_API void cmr_model_free(cmr_model* m);
CMR_API cmr_status cmr_model_info(const cmr_model* m, char** report);
/* One prediction per feature row, as JSON. */
CMR_API cmr_status cmr_predict(const cmr_model* m, const char* features_csv, char** report);

/* ---- network description --------------------------------------------------- */

typedef enum cmr_net_format {
  CMR_NET_SUMMARY = 0,     /* plain text: per-block and total parameters */
  CMR_NET_JSON = 1,
  CMR_NET_DOT = 2,
  CMR_NET_SWEEP = 3,       /* growth-rate sweep with quadratic fit, text */
  CMR_NET_CALIBRATION = 4  /* comparison with the published counts, text */
} cmr_net_format;

/* Network from the net.* config keys. */
CMR_API cmr_status cmr_netinfo(const cmr_config* cfg, cmr_net_format format, char** text);
/* Per-node shapes for input "CxHxW", one line per node. */
CMR_API cmr_status cmr_net_trace(const cmr_config* cfg, const char* input_shape, char** text);

/* ---- pipeline ------------------------------------------------------------- */

typedef struct cmr_pipeline_inputs {
  const char* case_id; /* NULL -> "case" */
  const char* cine;
  const char* ed;      /* NULL when absent */
  const char* es;
  const char* gt_ed;
  const char* gt_es;
  const char* out_dir;
} cmr_pipeline_inputs;

/* Writes artifacts and report.json to out_dir. On failure the report is
 * still written and CMR_E_PIPELINE names the stage. `report` (optional)
 * receives the report text in both cases. */
CMR_API cmr_status cmr_pipeline_run(const cmr_pipeline_inputs* in, const cmr_config* cfg, char** report);

/* CSV manifest (case_id,cine,ed,es,gt_ed,gt_es); each case goes to
 * out_root/case_id. `summary` is JSON. Fails with CMR_E_PIPELINE when any
 * case failed, after running all of them. */
CMR_API cmr_status cmr_pipeline_batch(const char* manifest_path, const char* out_root, const cmr_config* cfg,
                                      char** summary);

/* ---- synthetic data ------------------------------------------------------ */

/* kind "case": cine.mha, ed.mha, es.mha (labels equal to the ground truth).
 * kind "disk": cine.mha with a pulsating disk and truth.json.
 * kind "cohort": features.csv and labels.csv for `count` MINF/DCM-like cases.
 * `manifest` (optional) is JSON describing the files written. */
CMR_API cmr_status cmr_phantom(const char* kind, const char* out_dir, uint64_t seed, size_t count,
                               char** manifest);

#ifdef __cplusplus
}
#endif

#endif /* CMR_CMR_H */
