/*
 * codis - coincident event detection, classification, disentanglement and
 * property inference for 1D pulse-train sensor streams.
 *
 * C API of the shared library: opaque handles plus status codes. Error
 * details for the calling thread come from codis_last_error().
 */
#ifndef CODIS_CODIS_H
#define CODIS_CODIS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CODIS_API __declspec(dllexport)
#else
#define CODIS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum codis_status {
  CODIS_OK = 0,
  CODIS_ERROR = 1,
  CODIS_ERROR_CONFIG = 2,
  CODIS_ERROR_DATA = 3,
  CODIS_ERROR_BUDGET = 4,
  CODIS_ERROR_INVALID_ARGUMENT = 5
} codis_status;

CODIS_API const char* codis_version(void);

/* Message for the last failing call on this thread; never NULL. */
CODIS_API const char* codis_last_error(void);

/* ------------------------------------------------------------ profiles */

typedef struct codis_profile_info {
  char name[32];
  double amplitude_scale;      /* volts */
  double noise_std;            /* volts */
  double event_duration_mean;  /* seconds */
  double event_duration_cv;
  double velocity_mean;        /* mm/s */
  double velocity_cv;
  double true_diameter_mean;   /* micrometers */
  double true_diameter_cv;
  double drift_amplitude;      /* volts */
  double jump_probability;
  double sensing_distance;     /* meters */
} codis_profile_info;

CODIS_API int codis_profile_count(void);
CODIS_API codis_status codis_profile_get_index(int index, codis_profile_info* out);
CODIS_API codis_status codis_profile_get(const char* name, codis_profile_info* out);

/* ------------------------------------------------------------ datasets */

typedef struct codis_dataset codis_dataset;

CODIS_API codis_status codis_dataset_generate(const char* profile, uint64_t n_signals,
                                              const double class_mix[4], double sample_rate,
                                              uint64_t seed, int add_noise,
                                              codis_dataset** out);
CODIS_API codis_status codis_dataset_load(const char* dir, codis_dataset** out);
CODIS_API codis_status codis_dataset_save(const codis_dataset* ds, const char* dir);
CODIS_API int64_t codis_dataset_size(const codis_dataset* ds);
/* Borrowing accessors; the pointers stay valid while the handle lives. */
CODIS_API codis_status codis_dataset_signal(const codis_dataset* ds, int64_t index,
                                            const double** samples, int64_t* n_samples,
                                            double* sample_rate, int* event_count);
CODIS_API void codis_dataset_free(codis_dataset* ds);

/* ----------------------------------------------------------- detection */

typedef struct codis_segments codis_segments;

/* Profile selects the published per-type detection parameters. */
CODIS_API codis_status codis_detect(const double* samples, int64_t n, double sample_rate,
                                    const char* profile, codis_segments** out);
CODIS_API int64_t codis_segments_count(const codis_segments* segs);
CODIS_API codis_status codis_segments_info(const codis_segments* segs, int64_t index,
                                           int64_t* start, int64_t* length, int* accepted,
                                           char* reason, size_t reason_size);
CODIS_API void codis_segments_free(codis_segments* segs);

/* ---------------------------------------------------------- classifier */

typedef struct codis_model codis_model;

CODIS_API codis_status codis_model_load(const char* path, codis_model** out);
CODIS_API codis_status codis_model_save(const codis_model* model, const char* path);
/* refine_with_peaks != 0 applies the peak-count refinement step. */
CODIS_API codis_status codis_model_predict(const codis_model* model, const double* x,
                                           int64_t n, double sample_rate,
                                           int refine_with_peaks, int* count);
CODIS_API codis_status codis_model_forward(const codis_model* model, const double* x,
                                           int64_t n, double sample_rate, double probs[4]);
/* cam must hold n doubles. */
CODIS_API codis_status codis_model_cam(const codis_model* model, const double* x, int64_t n,
                                       double sample_rate, int class_label, double* cam);
CODIS_API void codis_model_free(codis_model* model);

/* ------------------------------------------------------- disentangling */

typedef struct codis_components codis_components;

/* count in 1..4; profile selects template-library seeds (may be NULL). */
CODIS_API codis_status codis_disentangle(const double* x, int64_t n, double sample_rate,
                                         int count, const char* profile,
                                         codis_components** out);
CODIS_API int codis_components_count(const codis_components* comps);
/* params: A1..A4, alpha1..alpha4, mu1..mu4, sigma1..sigma4 (16 doubles) */
CODIS_API codis_status codis_components_params(const codis_components* comps, int index,
                                               double params[16]);
CODIS_API codis_status codis_components_waveform(const codis_components* comps, int index,
                                                 const double** samples, int64_t* n);
CODIS_API codis_status codis_components_fidelity(const codis_components* comps,
                                                 const double* raw, int64_t n,
                                                 double* cross_correlation,
                                                 double* integral_deviation,
                                                 double* amplitude_deviation);
CODIS_API int codis_components_converged(const codis_components* comps);
CODIS_API void codis_components_free(codis_components* comps);

/* ----------------------------------------------------------- properties */

typedef struct codis_calibration codis_calibration;

CODIS_API codis_status codis_calibration_fit(const double* integrals, const double* diameters,
                                             int64_t n, codis_calibration** out);
CODIS_API codis_status codis_calibration_eval(const codis_calibration* cal, double integral,
                                              double* diameter_um, int* in_range);
CODIS_API void codis_calibration_free(codis_calibration* cal);

/* times: 4 strictly increasing peak times in seconds */
CODIS_API codis_status codis_event_velocity(const double times[4], double gmr_distance_m,
                                            double* velocity_mm_s);
CODIS_API codis_status codis_concentration(double total_events, double flow_rate_ul_min,
                                           double duration_s, double* events_per_ul);

/* ------------------------------------------------------------- commands */

typedef struct codis_run_options {
  const char* config_path; /* sectioned key-value text; may be NULL */
  const char* output_dir;  /* required */
  int has_seed;
  uint64_t seed;
  int workers; /* 0 = hardware default */
} codis_run_options;

/* Subcommands: simulate | detect | train | transfer-matrix | disentangle |
 * report. Returns the command exit status as a codis_status. */
CODIS_API codis_status codis_run(const char* subcommand, const codis_run_options* options);

#ifdef __cplusplus
}
#endif

#endif
