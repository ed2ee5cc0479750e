// SPDX-License-Identifier: GPL-2.0
#include <linux/kernel.h>
#include <sound/control.h>

#define MISC_MAX	32

struct misc_dev {
	int id;
	char name[16];
	snd_range_t range;
};

static struct misc_dev misc_devices[MISC_MAX];
static int misc_count;

static struct misc_dev *
misc_lookup(int id)
{
	int i;

	for (i = 0; i < misc_count; i++) {
		if (misc_devices[i].id == id)
			return &misc_devices[i];
	}
	return NULL;
}

int misc_register(int id,
		  const char *name)
{
	struct misc_dev *dev;

	if (misc_count >= MISC_MAX)
		return -ENOSPC;
	dev = &misc_devices[misc_count++];
	dev->id = id;
	strscpy(dev->name, name, sizeof(dev->name));
	return 0;
}

int misc_unregister(int id)
{
	struct misc_dev *dev = misc_lookup(id);

	if (!dev)
		return -ENOENT;
	dev->id = -1;
	return 0;
}

static int misc_in_range(const struct misc_dev *dev, int v)
{
	return v >= dev->range.lo && v <= dev->range.hi;
}

int misc_set_range(int id, int lo, int hi)
{
	struct misc_dev *dev = misc_lookup(id);

	if (!dev || lo > hi)
		return -EINVAL;
	dev->range.lo = lo;
	dev->range.hi = hi;
	return misc_in_range(dev, lo) ? 0 : -ERANGE;
}

#ifdef CONFIG_MISC_DEBUG
static void misc_dump(void)
{
	pr_info("misc: %d devices\n", misc_count);
}
#else
static void misc_dump(void)
{
}
#endif

void misc_reset(void)
{
	misc_dump();
	misc_count = 0;
}

int misc_total(void) { return misc_count; }
