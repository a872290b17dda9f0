# 光纤链路仿真模块 
