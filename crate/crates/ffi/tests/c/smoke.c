#include <stdio.h>
#include <string.h>
#include "cocr.h"

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            fprintf(stderr, "line %d: %s (%s)\n", __LINE__, #cond,    \
                    cocr_last_error() ? cocr_last_error() : "-");     \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    CocrGraph *g = NULL;
    CHECK(cocr_graph_parse("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 b))", &g) ==
          COCR_STATUS_OK);
    size_t nodes = 0;
    CHECK(cocr_graph_node_count(g, &nodes) == COCR_STATUS_OK && nodes == 3);

    char *json = NULL;
    CHECK(cocr_distill_json(g, "The boy wants to go.", NULL, &json) == COCR_STATUS_OK);
    CHECK(strstr(json, "\"boy\"") != NULL);
    cocr_string_free(json);
    cocr_graph_free(g);

    CocrGraph *bad = NULL;
    CHECK(cocr_graph_parse("(a / b", &bad) == COCR_STATUS_PARSE);
    CHECK(bad == NULL && strstr(cocr_last_error(), "UnbalancedParens") != NULL);

    double accs[] = {50, 60, 70};
    double area = 0;
    CHECK(cocr_auc(accs, 3, 1, 1, 3, &area) == COCR_STATUS_OK && area == 120.0);

    printf("ok %s\n", cocr_version());
    return 0;
}
