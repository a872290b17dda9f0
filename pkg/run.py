#!/usr/bin/env python3
"""
Voronoi 星座工具启动脚本
用法: python run.py <子命令> [--config 文件] [参数...]，子命令见 --help
"""
import sys
import os

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.cli.main import main

if __name__ == '__main__':
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        print("\n👋 已中断")
        sys.exit(130)
