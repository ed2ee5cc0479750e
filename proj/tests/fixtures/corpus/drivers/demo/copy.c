// SPDX-License-Identifier: GPL-2.0
#include <linux/uaccess.h>

#define MSG_MAX	64

struct demo_msg_hdr {
	unsigned int len;
	unsigned int type;
};

static int demo_msg_count = 0;

static int demo_validate_len(unsigned int len)
{
	if (len > MSG_MAX)
		return -EINVAL;
	return 0;
}

int demo_write_msg(const void __user *ubuf, unsigned int len)
{
	char kbuf[MSG_MAX];
	int ret;

	ret = demo_validate_len(len);
	if (ret)
		return ret;
	if (copy_from_user(kbuf, ubuf, len))
		return -EFAULT;
	demo_msg_count++;
	return 0;
}
