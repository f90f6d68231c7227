#include <math.h>
#include <stdio.h>
#include <string.h>

#include "wholepage.h"

int main(void) {
    WpRegion region;
    if (wp_region_of_position(12, &region) != WP_STATUS_OK || region != WP_REGION_MIDDLE) {
        return 1;
    }
    if (wp_region_of_position(0, &region) != WP_STATUS_INVALID_INPUT || strstr(wp_last_error(), "position") == NULL) {
        return 2;
    }

    uint32_t regions[] = {WP_REGION_TOP, WP_REGION_TOP, WP_REGION_BOTTOM};
    double areas[] = {300.0, 100.0, 10.0};
    bool matched[] = {true, false, true};
    double weights[] = {0.625, 0.375, 0.0};
    double value = 0.0;
    if (wp_pr_wp_bmr(regions, areas, matched, 3, weights, &value) != WP_STATUS_OK || fabs(value - 0.46875) > 1e-15) {
        return 3;
    }

    WpModel *model = NULL;
    if (wp_model_from_json("{", &model) != WP_STATUS_INVALID_INPUT || model != NULL) {
        return 4;
    }
    wp_model_free(NULL);
    wp_string_free(NULL);
    puts("ok");
    return 0;
}
