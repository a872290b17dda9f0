# 格与最近点模块 
