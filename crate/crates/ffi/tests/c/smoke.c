#include <math.h>
#include <stdio.h>
#include <string.h>
#include "prandtl_mhd.h"

int main(void) {
  double eps[3] = {1e-2, 1e-3, 1e-4};
  double err[3];
  for (int k = 0; k < 3; ++k) err[k] = 2.0 * pow(eps[k], 0.375);
  PmRateFit fit;
  if (pm_fit_rate(eps, err, 3, &fit) != PM_STATUS_OK) return 1;
  if (fabs(fit.slope - 0.375) > 1e-10 || fit.n_points != 3) return 2;

  PmConfig *cfg = NULL;
  if (pm_config_parse("bogus = 1", &cfg) != PM_STATUS_CONFIG || cfg != NULL) return 3;
  char msg[256];
  size_t n = pm_last_error_message(msg, sizeof msg);
  if (n == 0 || strstr(msg, "bogus") == NULL) return 4;

  if (pm_config_default(&cfg) != PM_STATUS_OK) return 5;
  double bad[2] = {1e-3, 1e-2};
  if (pm_config_set_eps_list(cfg, bad, 2) != PM_STATUS_CONFIG) return 6;
  pm_config_free(cfg);
  if (pm_report_rows(NULL) != 0) return 7;
  printf("ok %s\n", pm_version());
  return 0;
}
