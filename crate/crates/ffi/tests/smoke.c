#include <math.h>
#include <stdio.h>

#include "censor_lab.h"

int main(void) {
    double p = censor_lab_running_max_tail(0.0, 0.2, 0.2, 1.0);
    if (fabs(p - 0.31731050786291415) > 1e-14) {
        return 1;
    }

    CensorLabProblem *problem = NULL;
    double intervals[2] = {0.0, 0.3};
    double times[2] = {0.6, 0.9};
    if (censor_lab_problem_new(0.0, 1.0, intervals, 1, times, 2, 1, 0.1, -0.645, 0.3, 1.0, &problem)
        != CENSOR_LAB_STATUS_OK) {
        return 2;
    }
    CensorLabSolution solution;
    if (censor_lab_solve_censor(problem, 1e-10, &solution) != CENSOR_LAB_STATUS_OK) {
        return 3;
    }
    censor_lab_problem_free(problem);
    if (fabs(solution.residual) > 1e-10) {
        return 4;
    }

    CensorLabMarket *market = NULL;
    if (censor_lab_market_new(1.0, 1.1, 1.0, 1, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, CENSOR_LAB_INDEX_RUNNING_MAX, &market)
        == CENSOR_LAB_STATUS_OK) {
        return 5;
    }
    if (censor_lab_last_error() == NULL) {
        return 6;
    }
    printf("%.17g\n", solution.l_vt);
    return 0;
}
