"""
星座缓存管理器
同一进程内复用星座枚举表、能量估计和最小向量集，避免重复枚举
"""
import time
import hashlib
import logging
import threading
from typing import Any, Callable, Dict, Optional

import numpy as np

logger = logging.getLogger(__name__)


class ConstellationCache:
    """简单高效的进程级缓存 (线程安全)"""
    
    def __init__(self):
        self.cache: Dict[str, Any] = {}
        self._lock = threading.Lock()
        self.stats = {
            'hits': 0,
            'misses': 0,
            'enumerations_saved': 0,
            'start_time': time.time()
        }
    
    def get(self, key: str) -> Optional[Any]:
        """获取缓存值"""
        with self._lock:
            if key in self.cache:
                self.stats['hits'] += 1
                self.stats['enumerations_saved'] += 1
                return self.cache[key]
            self.stats['misses'] += 1
            return None
    
    def set(self, key: str, value: Any) -> None:
        """设置缓存值"""
        with self._lock:
            self.cache[key] = value
    
    def get_or_compute(self, key: str, factory: Callable[[], Any]) -> Any:
        """未命中时调用 factory 计算并写入；并发未命中时以先写入者为准"""
        value = self.get(key)
        if value is not None:
            return value
        value = factory()
        with self._lock:
            return self.cache.setdefault(key, value)
    
    def clear_and_report(self) -> Dict[str, Any]:
        """清理缓存并报告统计"""
        with self._lock:
            total_requests = self.stats['hits'] + self.stats['misses']
            hit_rate = (self.stats['hits'] / total_requests * 100) if total_requests > 0 else 0
            duration = time.time() - self.stats['start_time']
            
            report = {
                'cache_size': len(self.cache),
                'hit_rate': round(hit_rate, 1),
                'enumerations_saved': self.stats['enumerations_saved'],
                'total_requests': total_requests,
                'duration_seconds': round(duration, 2)
            }
            
            logger.info(f"📊 缓存统计: 命中率 {hit_rate:.1f}%, 节省枚举 {self.stats['enumerations_saved']} 次")
            
            self.cache.clear()
            self.stats = {
                'hits': 0,
                'misses': 0,
                'enumerations_saved': 0,
                'start_time': time.time()
            }
            return report
    
    def get_stats(self) -> Dict[str, Any]:
        """获取当前统计信息"""
        with self._lock:
            total_requests = self.stats['hits'] + self.stats['misses']
            hit_rate = (self.stats['hits'] / total_requests * 100) if total_requests > 0 else 0
            return {
                'cache_size': len(self.cache),
                'hit_rate': round(hit_rate, 1),
                'hits': self.stats['hits'],
                'misses': self.stats['misses'],
                'enumerations_saved': self.stats['enumerations_saved']
            }


class CacheKey:
    """缓存键生成器，确保键的一致性"""
    
    @staticmethod
    def shift_digest(a: np.ndarray) -> str:
        """平移向量的短摘要 (按字节)"""
        data = np.ascontiguousarray(a, dtype=np.float64).tobytes()
        return hashlib.sha1(data).hexdigest()[:16]
    
    @staticmethod
    def constellation_table(lattice_name: str, r: int, a: np.ndarray) -> str:
        """完整星座表 (信道坐标) 缓存键"""
        return f"table:{lattice_name}:r{r}:a{CacheKey.shift_digest(a)}"
    
    @staticmethod
    def energy(lattice_name: str, r: int, a: np.ndarray, n_samples: int, seed: int) -> str:
        """星座平均能量缓存键"""
        return f"energy:{lattice_name}:r{r}:a{CacheKey.shift_digest(a)}:n{n_samples}:s{seed}"
    
    @staticmethod
    def index_digits(r: int, n: int) -> str:
        """全部索引的数字展开缓存键"""
        return f"digits:r{r}:n{n}"


# 进程级共享实例
constellation_cache = ConstellationCache()
