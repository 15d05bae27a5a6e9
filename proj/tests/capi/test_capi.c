/* Exercises the C API from plain C. Usage: capi_tests <scratch-dir> */
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "cmr/cmr.h"

static int failures = 0;

#define EXPECT(cond)                                                      \
  do {                                                                    \
    if (!(cond)) {                                                        \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                         \
    }                                                                     \
  } while (0)

#define EXPECT_OK(call)                                                                           \
  do {                                                                                            \
    cmr_status s_ = (call);                                                                       \
    if (s_ != CMR_OK) {                                                                           \
      fprintf(stderr, "%s:%d: %s -> %s: %s\n", __FILE__, __LINE__, #call, cmr_status_name(s_), \
              cmr_last_error());                                                                  \
      ++failures;                                                                                 \
    }                                                                                             \
  } while (0)

static const char* join(const char* dir, const char* name) {
  static char buf[8][1024];
  static int slot = 0;
  char* out = buf[slot++ % 8];
  snprintf(out, sizeof buf[0], "%s/%s", dir, name);
  return out;
}

static char* slurp(const char* path) {
  FILE* f = fopen(path, "rb");
  char* text = NULL;
  long n = 0;
  if (!f) return NULL;
  fseek(f, 0, SEEK_END);
  n = ftell(f);
  fseek(f, 0, SEEK_SET);
  text = malloc((size_t)n + 1);
  if (text && fread(text, 1, (size_t)n, f) == (size_t)n) {
    text[n] = '\0';
  } else {
    free(text);
    text = NULL;
  }
  fclose(f);
  return text;
}

static void test_errors(void) {
  cmr_volume* v = NULL;
  EXPECT(cmr_volume_load(NULL, &v) == CMR_E_NULL);
  EXPECT(strlen(cmr_last_error()) > 0);
  EXPECT(cmr_volume_load("/nonexistent/file.mha", &v) == CMR_E_IO);
  EXPECT(v == NULL);
  EXPECT(strstr(cmr_status_name(CMR_E_CONFIG), "config") != NULL);
  EXPECT(cmr_version() != NULL && cmr_version()[0] != '\0');
  cmr_volume_free(NULL);
  cmr_config_free(NULL);
  cmr_model_free(NULL);
  cmr_string_free(NULL);
}

static void test_config(void) {
  cmr_config* cfg = NULL;
  char* value = NULL;
  char* name = NULL;
  EXPECT_OK(cmr_config_new(&cfg));
  EXPECT_OK(cmr_config_set(cfg, "roi.top_p", "7"));
  EXPECT_OK(cmr_config_get(cfg, "roi.top_p", &value));
  EXPECT(value && strcmp(value, "7") == 0);
  cmr_string_free(value);
  EXPECT(cmr_config_set(cfg, "roi.unknown", "1") == CMR_E_CONFIG);
  EXPECT(strstr(cmr_last_error(), "roi.unknown") != NULL);
  EXPECT_OK(cmr_config_env_name("net.k", &name));
  EXPECT(name && strcmp(name, "CMR_NET_K") == 0);
  cmr_string_free(name);
  cmr_config_free(cfg);
}

static void test_volumes(const char* dir) {
  const size_t dims[4] = {3, 2, 1, 1};
  const double sp[4] = {1.5, 1.5, 8.0, 1.0};
  const float data[6] = {0, 1, 2, 3, 4, 5};
  cmr_volume* v = NULL;
  cmr_volume* back = NULL;
  const float* got = NULL;
  size_t n = 0, d[4];
  int is_label = -1, nd = 0;
  EXPECT_OK(cmr_volume_new_scalar(dims, sp, 3, data, &v));
  EXPECT_OK(cmr_volume_save(v, join(dir, "v.mha")));
  EXPECT_OK(cmr_volume_load(join(dir, "v.mha"), &back));
  EXPECT_OK(cmr_volume_info(back, d, NULL, &nd, &is_label));
  EXPECT(d[0] == 3 && d[1] == 2 && nd == 3 && is_label == 0);
  EXPECT_OK(cmr_volume_scalar_data(back, &got, &n));
  EXPECT(n == 6 && got[5] == 5.0f);
  EXPECT(cmr_volume_label_data(back, NULL, &n) != CMR_OK);
  cmr_volume_free(v);
  cmr_volume_free(back);

  const uint8_t bad[6] = {0, 1, 9, 0, 0, 0};
  v = NULL;
  EXPECT(cmr_volume_new_label(dims, sp, 3, bad, &v) == CMR_E_ARGUMENT);
  EXPECT(v == NULL);
}

static void test_stages(const char* dir) {
  cmr_config* cfg = NULL;
  cmr_volume *cine = NULL, *ed = NULL, *es = NULL, *patch = NULL, *w = NULL, *post = NULL;
  char *report = NULL, *csv = NULL, *manifest = NULL;
  size_t d[4];
  EXPECT_OK(cmr_config_new(&cfg));
  EXPECT_OK(cmr_phantom("case", join(dir, "case"), 5, 1, &manifest));
  cmr_string_free(manifest);
  EXPECT_OK(cmr_volume_load(join(dir, "case/cine.mha"), &cine));
  EXPECT_OK(cmr_volume_load(join(dir, "case/ed.mha"), &ed));
  EXPECT_OK(cmr_volume_load(join(dir, "case/es.mha"), &es));

  EXPECT_OK(cmr_roi_locate(cine, cfg, &report, &patch));
  EXPECT(report && strstr(report, "center") != NULL);
  cmr_string_free(report);
  EXPECT_OK(cmr_volume_info(patch, d, NULL, NULL, NULL));
  EXPECT(d[0] == 128 && d[1] == 128);

  EXPECT_OK(cmr_weight_map(ed, cfg, &w));
  EXPECT_OK(cmr_postprocess(ed, cfg, &post));
  EXPECT_OK(cmr_evaluate(post, ed, &report));
  EXPECT(report && strstr(report, "dice") != NULL);
  cmr_string_free(report);
  EXPECT_OK(cmr_features(ed, es, cfg, "p1", &csv));
  EXPECT(csv && strncmp(csv, "case_id,", 8) == 0 && strstr(csv, "\np1,") != NULL);
  cmr_string_free(csv);
  EXPECT(cmr_features(ed, cine, cfg, "p1", &csv) != CMR_OK);

  cmr_volume_free(cine);
  cmr_volume_free(ed);
  cmr_volume_free(es);
  cmr_volume_free(patch);
  cmr_volume_free(w);
  cmr_volume_free(post);
  cmr_config_free(cfg);
}

static void test_model(const char* dir) {
  cmr_config* cfg = NULL;
  cmr_model *m = NULL, *m2 = NULL;
  char *summary = NULL, *report = NULL, *report2 = NULL, *features = NULL, *labels = NULL;
  EXPECT_OK(cmr_config_new(&cfg));
  EXPECT_OK(cmr_config_set(cfg, "classifier.rf_trees", "20"));
  EXPECT_OK(cmr_config_set(cfg, "classifier.mlp_max_epochs", "200"));
  EXPECT_OK(cmr_config_set(cfg, "classifier.compute_cv", "false"));
  EXPECT_OK(cmr_phantom("cohort", join(dir, "cohort"), 3, 20, NULL));
  features = slurp(join(dir, "cohort/features.csv"));
  labels = slurp(join(dir, "cohort/labels.csv"));
  EXPECT(features && labels);
  if (!features || !labels) return;
  EXPECT_OK(cmr_model_train(features, labels, cfg, &m, &summary));
  cmr_string_free(summary);
  EXPECT_OK(cmr_model_save(m, join(dir, "model.bin")));
  EXPECT_OK(cmr_model_load(join(dir, "model.bin"), &m2));
  EXPECT_OK(cmr_predict(m, features, &report));
  EXPECT_OK(cmr_predict(m2, features, &report2));
  EXPECT(report && report2 && strcmp(report, report2) == 0);
  cmr_string_free(report);
  cmr_string_free(report2);
  EXPECT(cmr_model_load(join(dir, "cohort/labels.csv"), &m2) == CMR_E_MODEL);
  free(features);
  free(labels);
  cmr_model_free(m);
  cmr_model_free(m2);
  cmr_config_free(cfg);
}

static void test_net(void) {
  cmr_config* cfg = NULL;
  char* text = NULL;
  EXPECT_OK(cmr_config_new(&cfg));
  EXPECT_OK(cmr_netinfo(cfg, CMR_NET_SUMMARY, &text));
  EXPECT(text && strstr(text, "467032") != NULL);
  cmr_string_free(text);
  EXPECT_OK(cmr_net_trace(cfg, "1x64x64", &text));
  cmr_string_free(text);
  EXPECT(cmr_net_trace(cfg, "1x100x100", &text) == CMR_E_TRACE);
  EXPECT_OK(cmr_config_set(cfg, "net.k", "0"));
  EXPECT(cmr_netinfo(cfg, CMR_NET_JSON, &text) != CMR_OK);
  cmr_config_free(cfg);
}

static void test_pipeline(const char* dir) {
  cmr_config* cfg = NULL;
  char *report = NULL, *again = NULL;
  cmr_pipeline_inputs in;
  memset(&in, 0, sizeof in);
  in.case_id = "p1";
  in.cine = join(dir, "case/cine.mha");
  in.ed = join(dir, "case/ed.mha");
  in.es = join(dir, "case/es.mha");
  in.gt_ed = in.ed;
  in.gt_es = in.es;
  in.out_dir = join(dir, "run");
  EXPECT_OK(cmr_config_new(&cfg));
  EXPECT_OK(cmr_pipeline_run(&in, cfg, &report));
  EXPECT_OK(cmr_pipeline_run(&in, cfg, &again));
  EXPECT(report && again && strcmp(report, again) == 0);
  cmr_string_free(report);
  cmr_string_free(again);
  in.es = NULL;
  in.gt_es = NULL;
  in.out_dir = join(dir, "run_no_es");
  EXPECT(cmr_pipeline_run(&in, cfg, &report) == CMR_E_PIPELINE);
  EXPECT(report && strstr(report, "\"failed_stage\"") != NULL);
  cmr_string_free(report);
  cmr_config_free(cfg);
}

int main(int argc, char** argv) {
  if (argc != 2) {
    fprintf(stderr, "usage: %s <scratch-dir>\n", argv[0]);
    return 2;
  }
  test_errors();
  test_config();
  test_stages(argv[1]); /* creates the scratch directory */
  test_volumes(argv[1]);
  test_model(argv[1]);
  test_net();
  test_pipeline(argv[1]);
  if (failures) {
    fprintf(stderr, "%d failure(s)\n", failures);
    return 1;
  }
  printf("capi: all checks passed\n");
  return 0;
}
