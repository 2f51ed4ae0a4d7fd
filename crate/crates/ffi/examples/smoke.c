#include <stdio.h>
#include "snaipw.h"

int main(void) {
    const double scores[] = {1.0, 2.0, 3.0, 4.0};
    SnaipwInterval ci;
    SnaipwStatus st = snaipw_sn_interval(scores, 4, 0.05, SNAIPW_CRITICAL_Z, &ci);
    if (st != SNAIPW_STATUS_OK) {
        fprintf(stderr, "%s\n", snaipw_last_error());
        return 1;
    }
    printf("theta_hat = %g, ci = [%g, %g]\n", ci.theta_hat, ci.ci_lo, ci.ci_hi);

    SnaipwPlan *plan = NULL;
    st = snaipw_plan_forward(10, 20, &plan);
    printf("status = %d: %s\n", (int)st, snaipw_last_error());
    return plan == NULL ? 0 : 1;
}
