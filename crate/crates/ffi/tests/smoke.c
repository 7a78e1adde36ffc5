#include <stdio.h>
#include <string.h>
#include "tree_history.h"

int main(void) {
    th_tree *tree = NULL;
    th_posterior *post = NULL;
    if (th_tree_parse("A B\nB C\n", &tree) != TH_STATUS_OK) return 1;
    if (th_posterior_new(tree, &post) != TH_STATUS_OK) return 2;
    size_t nodes[3], size = 0;
    if (th_confidence_set(tree, post, 0.4, nodes, 3, &size) != TH_STATUS_OK) return 3;
    double probs[3];
    if (th_posterior_root_probs(tree, post, probs, 3) != TH_STATUS_OK) return 4;
    size_t b = 0;
    if (th_tree_index_of(tree, "B", &b) != TH_STATUS_OK) return 5;
    printf("size=%zu pB=%.3f\n", size, probs[b]);
    if (th_tree_parse("x x\n", &tree) != TH_STATUS_PARSE_ERROR) return 6;
    if (th_last_error() == NULL || strlen(th_last_error()) == 0) return 7;
    th_posterior_free(post);
    th_tree_free(tree);
    return size == 3 ? 0 : 8;
}
