#pragma once

#include "crlsc/augment.hpp"
#include "crlsc/config.hpp"
#include "crlsc/dataset.hpp"
#include "crlsc/dcl.hpp"
#include "crlsc/fusion.hpp"
#include "crlsc/kmeans.hpp"
#include "crlsc/knowledge_base.hpp"
#include "crlsc/metrics.hpp"
#include "crlsc/mlp.hpp"
#include "crlsc/net_client.hpp"
#include "crlsc/net_server.hpp"
#include "crlsc/pq.hpp"
#include "crlsc/stage1.hpp"
#include "crlsc/stage2.hpp"
#include "crlsc/transfer.hpp"
#include "crlsc/util.hpp"
#include "crlsc/vq.hpp"
#include "crlsc/wire.hpp"
