// SPDX-License-Identifier: GPL-2.0
#include <linux/list.h>
#include <sound/control.h>

struct demo_node {
	struct list_head link;
	int weight;
};

struct demo_owner {
	struct list_head nodes;
	struct demo_node first;
	int total;
};

static LIST_HEAD(demo_nodes);

int demo_sum_weights(struct demo_owner *owner)
{
	struct demo_node *node;
	int sum = 0;

	list_for_each_entry(node, &owner->nodes, link) {
		sum += node->weight;
	}
	owner->total = sum;
	return sum;
}

struct demo_owner *demo_owner_of(struct demo_node *node)
{
	return container_of(node, struct demo_owner, first);
}
