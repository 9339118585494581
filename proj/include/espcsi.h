/* C API for the espcsi toolkit: synthetic phase-coherent WiFi CSI
 * generation, dataset containers, multi-board stream simulation, channel
 * charting and evaluation. All functions return espcsi_status; on failure
 * espcsi_last_error() describes the problem. Handles are opaque and owned
 * by the caller via the matching _free function. Strings returned through
 * char** are released with espcsi_string_free(). Not thread-safe per
 * handle; distinct handles may be used from distinct threads. */
#ifndef ESPCSI_H
#define ESPCSI_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
    ESPCSI_OK = 0,
    ESPCSI_ERR_USAGE = 1,   /* bad arguments or configuration */
    ESPCSI_ERR_DATA = 2,    /* malformed or inconsistent data */
    ESPCSI_ERR_NUMERIC = 3  /* numerical failure (divergence, non-finite) */
} espcsi_status;

typedef struct espcsi_dataset espcsi_dataset;
typedef struct espcsi_model espcsi_model;

/* Message for the most recent failure on this thread. */
const char* espcsi_last_error(void);

void espcsi_string_free(char* s);

/* ---- datasets (.espcsi containers) ---- */
espcsi_status espcsi_dataset_open(const char* path, espcsi_dataset** out);
espcsi_status espcsi_dataset_save(const espcsi_dataset* dataset, const char* path);
void espcsi_dataset_free(espcsi_dataset* dataset);
size_t espcsi_dataset_size(const espcsi_dataset* dataset);

/* Header metadata plus per-field statistics as one JSON object. */
espcsi_status espcsi_dataset_info_json(const espcsi_dataset* dataset, char** out_json);

/* ---- configuration ---- */
/* The built-in reference scene configuration as JSON text. */
espcsi_status espcsi_default_config(char** out_json);

/* ---- pipeline stages ----
 * config_json may be NULL (built-in defaults). When override_seed is
 * nonzero, `seed` replaces the config file's seed. */
espcsi_status espcsi_synth(const char* config_json, uint64_t seed, int override_seed,
                           espcsi_dataset** out);

/* Emit per-board frame streams with loss/jitter, aggregate them back and
 * return the fused dataset; stats_json (optional) reports loss counters. */
espcsi_status espcsi_stream_sim(const espcsi_dataset* source, const char* config_json,
                                double loss_rate, double jitter_std, uint64_t seed,
                                int override_seed, espcsi_dataset** out,
                                char** stats_json);

espcsi_status espcsi_train(const espcsi_dataset* dataset, const char* config_json,
                           uint64_t seed, int override_seed, espcsi_model** out);

espcsi_status espcsi_model_open(const char* path, espcsi_model** out);
espcsi_status espcsi_model_save(const espcsi_model* model, const char* path);
void espcsi_model_free(espcsi_model* model);

/* CSV `l,t,y1,y2,x1,x2,x3`: chart coordinates for every datapoint. */
espcsi_status espcsi_chart_csv(const espcsi_model* model, const espcsi_dataset* dataset,
                               const char* csv_path);

/* Five-metric report as JSON. k <= 0 picks max(10, round(0.01 N));
 * subsample 0 means no subsampling. scatter_csv (optional) receives
 * `l,x1,x2,y1,y2,xhat1,xhat2` rows for plotting. */
espcsi_status espcsi_eval(const espcsi_dataset* dataset, const espcsi_model* model,
                          int k, uint64_t subsample, uint64_t seed,
                          const char* scatter_csv, char** report_json);

/* CSV `t,azimuth_rad,true_azimuth_rad` via beamforming on one board. */
espcsi_status espcsi_aoa_csv(const espcsi_dataset* dataset, int board,
                             const char* csv_path);

#ifdef __cplusplus
}
#endif

#endif /* ESPCSI_H */
