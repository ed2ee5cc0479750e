// SPDX-License-Identifier: GPL-2.0
#include <linux/kernel.h>

#define SLOTS	8

static int demo_slots[SLOTS];

int demo_pick_slot(int flag, int a, int b)
{
	int v;

	v = flag ? a : b;
	return demo_slots[v];
}
